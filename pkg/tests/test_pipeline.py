"""End-to-end pipeline: scoring, leakage control, sweeps, determinism."""

import dataclasses

import numpy as np
import pytest

from shiftrc.config import DataConfig, ExperimentConfig, derive_seed
from shiftrc.pipeline import (
    MaskContext,
    SelectionSpec,
    build_dataset,
    percent_improvement,
    prepare_mask_context,
    run_single,
    score_selection,
    sweep,
)
from shiftrc.reservoir import StateMatrix
from shiftrc.shifts import build_shifted_matrix


def tiny_config(**overrides) -> ExperimentConfig:
    data = DataConfig(
        system="lorenz", task="prediction", train_steps=400, test_steps=200,
        dt_internal=0.01, sample_interval=1.0, transient_samples=100,
        initial_state=(1.0, 1.0, 1.0), standardize_drive=True,
    )
    kwargs = dict(
        data=data,
        reservoir={"kind": "oeo", "nodes": 4, "theta": 4, "beta": 0.8,
                   "phi": 0.2, "rho": 0.4, "f_w": 0.5, "sample_offset": None},
        tau_max=3,
        m_red_grid=(4, 8, 16),
        ridge_lambda=1e-6,
        n_masks=2,
        n_random_subsets=2,
        master_seed=31,
        washout=20,
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


class TestPercentImprovement:
    def test_equal_errors(self):
        assert percent_improvement(0.5, 0.5) == 0.0

    def test_halved_error(self):
        assert percent_improvement(0.4, 0.2) == pytest.approx(50.0)

    def test_negative_improvement(self):
        assert percent_improvement(0.2, 0.4) == pytest.approx(-100.0)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            percent_improvement(0.0, 0.1)

    def test_identity_is_exactly_zero(self):
        for a in (1e-9, 0.3, 1.0, 17.5, 1e9):
            assert percent_improvement(a, a) == 0.0


def _synthetic_context(rng, target_in_span=True):
    t = 120
    tau = 2
    g_full = rng.normal(size=t)
    cols = rng.normal(size=(t, 3))
    if target_in_span:
        cols[:, 1] = g_full
    train = StateMatrix(values=cols[:80], node_ids=[0, 1, 2], washout=0)
    test = StateMatrix(values=cols[80:], node_ids=[0, 1, 2], washout=0)
    return MaskContext(
        shifted_train=build_shifted_matrix(train, tau),
        shifted_test=build_shifted_matrix(test, tau),
        target_train=g_full[:80][tau:],
        target_test=g_full[80:][tau:],
        n_nodes=3,
    )


class TestScoreSelection:
    def test_target_in_column_space_fits_exactly(self, rng):
        ctx = _synthetic_context(rng)
        train_err, test_err = score_selection(
            ctx, [(n, 0) for n in range(3)], ridge_lambda=0.0
        )
        assert train_err <= 1e-8
        assert test_err <= 1e-8

    def test_shift_zero_selection_equals_unshifted_window(self, rng):
        # selecting only shift-0 columns from a tau_max=3 build reproduces
        # the source matrix on the shared trimmed window
        values = rng.normal(size=(60, 4))
        sm = StateMatrix(values=values, node_ids=list(range(4)), washout=0)
        shifted = build_shifted_matrix(sm, 3)
        from shiftrc.shifts import reduce_columns

        reduced = reduce_columns(shifted, [(n, 0) for n in range(4)])
        np.testing.assert_array_equal(reduced.values, values[3:])


class TestRunSingle:
    def test_baseline_uses_all_nodes_unshifted(self):
        cfg = tiny_config()
        res = run_single(cfg, derive_seed(cfg.master_seed, "trial", 0),
                         SelectionSpec("baseline"), mask_id=0)
        assert res.method == "baseline"
        assert res.m_red == 4
        assert res.nrmse_test >= 0.0 and np.isfinite(res.nrmse_test)

    def test_rrqr_and_random_converge_at_full_width(self):
        cfg = tiny_config()
        seed = derive_seed(cfg.master_seed, "trial", 0)
        ctx = prepare_mask_context(cfg, seed)
        full = cfg.n_shift_columns
        r1 = run_single(cfg, seed, SelectionSpec("rrqr", full), ctx=ctx)
        r2 = run_single(cfg, seed, SelectionSpec("random", full, subset_seed=9), ctx=ctx)
        assert r1.nrmse_test == pytest.approx(r2.nrmse_test, rel=1e-8)

    def test_no_test_leakage(self):
        # corrupting the test split must not change selection or weights
        cfg = tiny_config()
        seed = derive_seed(cfg.master_seed, "trial", 0)
        ctx_a = prepare_mask_context(cfg, seed)
        ctx_b = prepare_mask_context(cfg, seed)
        rng = np.random.default_rng(0)
        ctx_b.shifted_test.values[:] = rng.normal(size=ctx_b.shifted_test.values.shape)
        ctx_b.target_test = rng.normal(size=ctx_b.target_test.shape)

        sel_a = ctx_a.full_pivot()
        sel_b = ctx_b.full_pivot()
        assert sel_a.retained == sel_b.retained

        from shiftrc.linalg import ridge_fit
        from shiftrc.shifts import reduce_columns

        w_a = ridge_fit(reduce_columns(ctx_a.shifted_train, sel_a.retained[:8]).values,
                        ctx_a.target_train, cfg.ridge_lambda).w
        w_b = ridge_fit(reduce_columns(ctx_b.shifted_train, sel_b.retained[:8]).values,
                        ctx_b.target_train, cfg.ridge_lambda).w
        np.testing.assert_array_equal(w_a, w_b)

    def test_random_requires_subset_seed(self):
        cfg = tiny_config()
        with pytest.raises(ValueError, match="subset_seed"):
            run_single(cfg, 1, SelectionSpec("random", 4))


class TestSweep:
    def test_deterministic_repeat(self):
        cfg = tiny_config()
        a = sweep(cfg)
        b = sweep(cfg)
        assert [dataclasses.asdict(r) for r in a.rows] == [
            dataclasses.asdict(r) for r in b.rows
        ]
        assert [dataclasses.asdict(c) for c in a.cells] == [
            dataclasses.asdict(c) for c in b.cells
        ]

    def test_threaded_matches_serial(self):
        cfg = tiny_config()
        serial = sweep(cfg, threads=1)
        threaded = sweep(cfg, threads=3)
        assert [dataclasses.asdict(r) for r in serial.rows] == [
            dataclasses.asdict(r) for r in threaded.rows
        ]

    def test_full_width_grid_has_no_improvement(self):
        cfg = tiny_config(m_red_grid=(16,))
        rows = sweep(cfg).rows
        assert abs(rows[0].percent_improvement) <= 0.5

    def test_row_consistency_with_definition(self):
        cfg = tiny_config()
        res = sweep(cfg)
        for row in res.rows:
            expect = 100.0 * (row.nrmse_rand_mean - row.nrmse_rrqr_mean) / row.nrmse_rand_mean
            assert row.percent_improvement == pytest.approx(expect, abs=1e-12)

    def test_subset_modes(self):
        cfg = tiny_config(m_red_grid=(8,))
        only_rrqr = sweep(cfg, subset_mode="rrqr")
        assert only_rrqr.rows[0].nrmse_rand_mean is None
        assert only_rrqr.rows[0].percent_improvement is None
        assert only_rrqr.rows[0].nrmse_rrqr_mean is not None
        only_rand = sweep(cfg, subset_mode="random")
        assert only_rand.rows[0].nrmse_rrqr_mean is None
        assert not only_rand.pivots

    def test_fresh_state_mode_runs(self):
        cfg = tiny_config(continuation=False, m_red_grid=(8,), n_masks=1)
        res = sweep(cfg)
        assert np.isfinite(res.rows[0].nrmse_rrqr_mean)


class TestSeedDerivation:
    def test_frozen_reference_values(self):
        # pinned: the derivation is part of the replay contract
        assert derive_seed(1, "trial", 0) == 14846554670716690330
        assert derive_seed(1, "trial", 1) == 3937021591179696062
        assert derive_seed(1, "subset", 0, 0, 10) == 3041934092799301074
        assert derive_seed(12345, "mask") == 16241832744585225427

    def test_distinct_roles_distinct_seeds(self):
        seeds = {
            derive_seed(7, role, 0)
            for role in ("trial", "mask", "adjacency", "input-weights", "subset")
        }
        assert len(seeds) == 5


def test_dataset_cache_returns_consistent_data():
    cfg = tiny_config()
    a = build_dataset(cfg.data)
    b = build_dataset(cfg.data)
    np.testing.assert_array_equal(a.drive_train, b.drive_train)
    assert a.standardization == b.standardization
