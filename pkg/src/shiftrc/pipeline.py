"""End-to-end train/test orchestration.

Drives a reservoir over the train and test splits, builds the time-shifted
matrices, applies a column selection computed on training data only, fits
the ridge readout, and scores both splits. Sweeps average the pivoted-QR
and random selections over masks and subsets and report the percent
improvement between the two arms.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import analysis, dynamics, linalg, reservoir, shifts
from .config import AnalysisConfig, DataConfig, ExperimentConfig, derive_seed
from .linalg import NrmseMode


@dataclass(frozen=True)
class SelectionSpec:
    """Which columns to keep in one pipeline run.

    ``method`` is "rrqr", "random" or "baseline"; the baseline is the
    unshifted reservoir evaluated on the same trimmed row window.
    """

    method: str
    m_red: int | None = None
    subset_seed: int | None = None


@dataclass
class TaskResult:
    nrmse_train: float
    nrmse_test: float
    method: str
    m_red: int
    mask_id: int
    subset_seed: int | None = None


@dataclass
class SweepRow:
    m_red: int
    nrmse_rrqr_mean: float | None
    nrmse_rrqr_std: float | None
    nrmse_rand_mean: float | None
    nrmse_rand_std: float | None
    nrmse_baseline_mean: float
    percent_improvement: float | None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    cells: list[TaskResult]
    pivots: list[shifts.SelectionResult] = field(default_factory=list)


def percent_improvement(delta_rand: float, delta_rrqr: float) -> float:
    """Relative gain of the ranked selection over the random one, percent."""
    if delta_rand <= 0.0:
        raise ValueError(f"delta_rand must be positive, got {delta_rand}")
    return 100.0 * (delta_rand - delta_rrqr) / delta_rand


@lru_cache(maxsize=8)
def _series_cached(data: DataConfig) -> np.ndarray:
    params_fn = (
        dynamics.lorenz_params
        if data.system == "lorenz"
        else dynamics.rossler_params
    )
    params = params_fn(
        dt_internal=data.dt_internal,
        sample_interval=data.sample_interval,
        transient_samples=data.transient_samples,
    )
    series = dynamics.integrate_chaotic(
        params, data.initial_state, data.train_steps + data.test_steps + 1
    )
    series.setflags(write=False)
    return series


def build_series(data: DataConfig) -> np.ndarray:
    """Sampled 3-column source series for a data config (cached, read-only)."""
    return _series_cached(data)


def build_dataset(data: DataConfig, task: str | None = None) -> dynamics.TaskDataset:
    """Task dataset for a data config; ``task`` overrides the configured kind."""
    kind = dynamics.TaskKind(task if task is not None else data.task)
    return dynamics.make_task(
        build_series(data),
        kind,
        split=(data.train_steps, data.test_steps),
        standardize_drive=data.standardize_drive,
    )


def build_trial_reservoir(cfg: ExperimentConfig, trial_seed: int):
    """Instantiate the per-trial reservoir (mask or adjacency realization)."""
    params = cfg.reservoir
    if params["kind"] == "oeo":
        return reservoir.make_oeo_config(
            m=params["nodes"],
            theta=params["theta"],
            beta=params["beta"],
            phi=params["phi"],
            rho=params["rho"],
            f_w=params["f_w"],
            sample_offset=params.get("sample_offset"),
            mask_seed=derive_seed(trial_seed, "mask"),
        )
    return reservoir.make_tanh_config(
        m=params["nodes"],
        alpha=params["alpha"],
        f_a=params["f_a"],
        f_w=params["f_w"],
        spectral_radius=params["spectral_radius"],
        adjacency_seed=derive_seed(trial_seed, "adjacency"),
        input_seed=derive_seed(trial_seed, "input-weights"),
    )


def _run_reservoir(res_cfg, drive, washout):
    if isinstance(res_cfg, reservoir.OEOConfig):
        return reservoir.run_oeo_reservoir(res_cfg, drive, washout)
    return reservoir.run_tanh_reservoir(res_cfg, drive, washout)


def run_split_states(res_cfg, dataset: dynamics.TaskDataset, washout: int,
                     continuation: bool = True):
    """Run a reservoir over both splits and return aligned states and targets.

    With ``continuation`` the test split continues from the post-training
    reservoir state (one run over the concatenated drive, then a row split);
    otherwise the test split starts fresh and pays its own washout.
    """
    t_train = dataset.drive_train.shape[0]
    if continuation:
        full = np.concatenate([dataset.drive_train, dataset.drive_test])
        sm = _run_reservoir(res_cfg, full, washout)
        n_train_rows = t_train - washout
        train = reservoir.StateMatrix(
            sm.values[:n_train_rows], list(sm.node_ids), washout
        )
        test = reservoir.StateMatrix(
            sm.values[n_train_rows:], list(sm.node_ids), 0
        )
        return (
            train,
            test,
            dataset.target_train[washout:],
            dataset.target_test,
        )
    train = _run_reservoir(res_cfg, dataset.drive_train, washout)
    test = _run_reservoir(res_cfg, dataset.drive_test, washout)
    return (
        train,
        test,
        dataset.target_train[washout:],
        dataset.target_test[washout:],
    )


@dataclass
class MaskContext:
    """Everything one (mask, task) pair needs to score any selection."""

    shifted_train: shifts.ShiftedMatrix
    shifted_test: shifts.ShiftedMatrix
    target_train: np.ndarray
    target_test: np.ndarray
    n_nodes: int
    pivot: shifts.SelectionResult | None = None

    def full_pivot(self) -> shifts.SelectionResult:
        """Full-width ranked selection, computed once and reused per m_red."""
        if self.pivot is None:
            self.pivot = shifts.rrqr_select(
                self.shifted_train, self.shifted_train.n_columns
            )
        return self.pivot


def prepare_mask_context(
    cfg: ExperimentConfig,
    trial_seed: int,
    dataset: dynamics.TaskDataset | None = None,
) -> MaskContext:
    """Simulate one reservoir realization and build its shifted matrices."""
    if dataset is None:
        dataset = build_dataset(cfg.data)
    res_cfg = build_trial_reservoir(cfg, trial_seed)
    train, test, g_train, g_test = run_split_states(
        res_cfg, dataset, cfg.washout, cfg.continuation
    )
    tau = cfg.tau_max
    return MaskContext(
        shifted_train=shifts.build_shifted_matrix(train, tau),
        shifted_test=shifts.build_shifted_matrix(test, tau),
        target_train=g_train[tau:],
        target_test=g_test[tau:],
        n_nodes=train.n_nodes,
    )


def score_selection(
    ctx: MaskContext,
    pairs,
    ridge_lambda: float,
    include_bias: bool = False,
    nrmse_mode: NrmseMode = NrmseMode.GLOBAL,
) -> tuple[float, float]:
    """Fit on the reduced training matrix, score both splits.

    The selection and the readout depend only on training data; the test
    matrix is reduced with the identical column list.
    """
    reduced_train = shifts.reduce_columns(ctx.shifted_train, pairs)
    reduced_test = shifts.reduce_columns(ctx.shifted_test, pairs)
    readout = linalg.ridge_fit(
        reduced_train.values, ctx.target_train, ridge_lambda, include_bias
    )
    train_err = linalg.nrmse(
        ctx.target_train, linalg.predict(reduced_train.values, readout), nrmse_mode
    )
    test_err = linalg.nrmse(
        ctx.target_test, linalg.predict(reduced_test.values, readout), nrmse_mode
    )
    return train_err, test_err


def _selection_pairs(ctx: MaskContext, spec: SelectionSpec):
    if spec.method == "baseline":
        return [(node, 0) for node in range(ctx.n_nodes)]
    if spec.m_red is None:
        raise ValueError(f"selection method {spec.method!r} requires m_red")
    if spec.method == "rrqr":
        return ctx.full_pivot().retained[: spec.m_red]
    if spec.method == "random":
        if spec.subset_seed is None:
            raise ValueError("random selection requires subset_seed")
        return shifts.random_select(
            ctx.shifted_train, spec.m_red, spec.subset_seed
        ).retained
    raise ValueError(f"unknown selection method {spec.method!r}")


def run_single(
    cfg: ExperimentConfig,
    mask_seed: int,
    selection: SelectionSpec,
    mask_id: int | None = None,
    dataset: dynamics.TaskDataset | None = None,
    ctx: MaskContext | None = None,
) -> TaskResult:
    """One full train/test evaluation for one reservoir realization."""
    if ctx is None:
        ctx = prepare_mask_context(cfg, mask_seed, dataset)
    pairs = _selection_pairs(ctx, selection)
    train_err, test_err = score_selection(
        ctx, pairs, cfg.ridge_lambda, cfg.include_bias, NrmseMode(cfg.nrmse_mode)
    )
    return TaskResult(
        nrmse_train=train_err,
        nrmse_test=test_err,
        method=selection.method,
        m_red=len(pairs),
        mask_id=mask_id if mask_id is not None else mask_seed,
        subset_seed=selection.subset_seed,
    )


def _sweep_one_mask(cfg, mask_id, dataset, subset_mode):
    trial_seed = derive_seed(cfg.master_seed, "trial", mask_id)
    ctx = prepare_mask_context(cfg, trial_seed, dataset)
    cells: list[TaskResult] = []
    do_rrqr = subset_mode in ("both", "rrqr")
    do_random = subset_mode in ("both", "random")
    for m_red in cfg.m_red_grid:
        if do_rrqr:
            cells.append(
                run_single(cfg, trial_seed, SelectionSpec("rrqr", m_red),
                           mask_id=mask_id, ctx=ctx)
            )
        if do_random:
            for subset_id in range(cfg.n_random_subsets):
                seed = derive_seed(cfg.master_seed, "subset", mask_id, subset_id, m_red)
                cells.append(
                    run_single(cfg, trial_seed,
                               SelectionSpec("random", m_red, subset_seed=seed),
                               mask_id=mask_id, ctx=ctx)
                )
    cells.append(
        run_single(cfg, trial_seed, SelectionSpec("baseline"), mask_id=mask_id, ctx=ctx)
    )
    pivot = ctx.full_pivot() if do_rrqr else None
    return cells, pivot


def sweep(cfg: ExperimentConfig, threads: int = 1, subset_mode: str = "both") -> SweepResult:
    """Evaluate every m_red on the grid, averaged over masks and subsets.

    Masks are independent work items; the reduction is keyed by mask id so
    any execution order produces identical output.
    """
    if subset_mode not in ("both", "rrqr", "random"):
        raise ValueError(f"subset_mode must be both|rrqr|random, got {subset_mode}")
    dataset = build_dataset(cfg.data)
    mask_ids = list(range(cfg.n_masks))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_mask = list(
                pool.map(lambda i: _sweep_one_mask(cfg, i, dataset, subset_mode), mask_ids)
            )
    else:
        per_mask = [_sweep_one_mask(cfg, i, dataset, subset_mode) for i in mask_ids]

    cells = [cell for mask_cells, _ in per_mask for cell in mask_cells]
    pivots = [pivot for _, pivot in per_mask if pivot is not None]

    rows = []
    for m_red in cfg.m_red_grid:
        rrqr_vals = np.array(
            [c.nrmse_test for c in cells if c.method == "rrqr" and c.m_red == m_red]
        )
        rand_vals = np.array(
            [c.nrmse_test for c in cells if c.method == "random" and c.m_red == m_red]
        )
        base_vals = np.array([c.nrmse_test for c in cells if c.method == "baseline"])
        rrqr_mean = float(rrqr_vals.mean()) if rrqr_vals.size else None
        rand_mean = float(rand_vals.mean()) if rand_vals.size else None
        rows.append(
            SweepRow(
                m_red=m_red,
                nrmse_rrqr_mean=rrqr_mean,
                nrmse_rrqr_std=float(rrqr_vals.std()) if rrqr_vals.size else None,
                nrmse_rand_mean=rand_mean,
                nrmse_rand_std=float(rand_vals.std()) if rand_vals.size else None,
                nrmse_baseline_mean=float(base_vals.mean()),
                percent_improvement=(
                    percent_improvement(rand_mean, rrqr_mean)
                    if rrqr_mean is not None and rand_mean is not None
                    else None
                ),
            )
        )
    return SweepResult(rows=rows, cells=cells, pivots=pivots)


@dataclass
class AnalysisRow:
    f_w: float
    f_a: float
    entropy_bits: float
    mean_correlation: float
    nrmse_observer: float
    nrmse_prediction: float


def _analysis_cell(acfg: AnalysisConfig, i_fw, f_w, i_fa, f_a,
                   datasets) -> AnalysisRow:
    cfg = acfg.base
    obs, pred = datasets
    entropies, correlations, err_obs, err_pred = [], [], [], []
    mode = NrmseMode(cfg.nrmse_mode)
    for trial in range(acfg.n_trials):
        res_cfg = reservoir.make_tanh_config(
            m=cfg.reservoir["nodes"],
            alpha=cfg.reservoir["alpha"],
            f_a=f_a,
            f_w=f_w,
            spectral_radius=cfg.reservoir["spectral_radius"],
            adjacency_seed=derive_seed(cfg.master_seed, "adjacency", i_fw, i_fa, trial),
            input_seed=derive_seed(cfg.master_seed, "input-weights", i_fw, i_fa, trial),
        )
        train, test, g_obs_train, g_obs_test = run_split_states(
            res_cfg, obs, cfg.washout, cfg.continuation
        )
        entropies.append(analysis.reservoir_entropy(train, acfg.window))
        correlations.append(
            analysis.node_target_correlation(train, g_obs_train)
        )
        readout = linalg.ridge_fit(train.values, g_obs_train, cfg.ridge_lambda)
        err_obs.append(
            linalg.nrmse(g_obs_test, linalg.predict(test.values, readout), mode)
        )
        # The two tasks share the drive, so the same states serve both fits.
        g_pred_train = pred.target_train[cfg.washout :]
        g_pred_test = pred.target_test if cfg.continuation \
            else pred.target_test[cfg.washout :]
        readout = linalg.ridge_fit(train.values, g_pred_train, cfg.ridge_lambda)
        err_pred.append(
            linalg.nrmse(g_pred_test, linalg.predict(test.values, readout), mode)
        )
    return AnalysisRow(
        f_w=f_w,
        f_a=f_a,
        entropy_bits=float(np.mean(entropies)),
        mean_correlation=float(np.mean(correlations)),
        nrmse_observer=float(np.mean(err_obs)),
        nrmse_prediction=float(np.mean(err_pred)),
    )


def analysis_sweep(acfg: AnalysisConfig, threads: int = 1) -> list[AnalysisRow]:
    """Entropy, node-target correlation, and unshifted-readout errors over
    the (f_w, f_a) sparseness grid, averaged over seeded trials."""
    base = acfg.base
    obs = build_dataset(base.data, "observer")
    pred = build_dataset(base.data, "prediction")
    cells = [
        (i_fw, f_w, i_fa, f_a)
        for i_fw, f_w in enumerate(acfg.f_w_values)
        for i_fa, f_a in enumerate(acfg.f_a_values)
    ]
    worker = lambda args: _analysis_cell(acfg, *args, datasets=(obs, pred))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, cells))
    return [worker(args) for args in cells]
