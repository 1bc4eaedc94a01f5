"""Pivoted QR kernel, rank estimation, ridge readout and error metric."""

import numpy as np
import pytest

from shiftrc.errors import DegenerateTargetError, SingularMatrixError
from shiftrc.linalg import (
    NrmseMode,
    covariance_rank,
    estimate_rank,
    nrmse,
    predict,
    qr_column_pivot,
    r22_bound_check,
    ridge_fit,
    save_r_diag_csv,
)


def jacobi_gram_eigenvalues(b, sweeps=100, tol=1e-14):
    """Eigenvalues of B^T B by classical Jacobi rotations.

    Independent of any QR/SVD routine: rotates away the largest off-diagonal
    element until convergence. Returns the squared singular values of B,
    descending.
    """
    g = b.T @ b
    n = g.shape[0]
    for _ in range(sweeps * n * n):
        off = np.abs(g - np.diag(np.diag(g)))
        p, q = np.unravel_index(np.argmax(off), off.shape)
        if off[p, q] < tol * np.max(np.abs(np.diag(g))):
            break
        theta = 0.5 * np.arctan2(2.0 * g[p, q], g[q, q] - g[p, p])
        c, s = np.cos(theta), np.sin(theta)
        rot = np.eye(n)
        rot[p, p] = c
        rot[q, q] = c
        rot[p, q] = s
        rot[q, p] = -s
        g = rot.T @ g @ rot
    return np.sort(np.diag(g))[::-1]


def gram_schmidt_lstsq(x, g):
    """Least squares by modified Gram-Schmidt, independent of the QR kernel."""
    x = np.asarray(x, dtype=float)
    t, k = x.shape
    q = np.zeros((t, k))
    r = np.zeros((k, k))
    for j in range(k):
        v = x[:, j].copy()
        for i in range(j):
            r[i, j] = q[:, i] @ v
            v -= r[i, j] * q[:, i]
        r[j, j] = np.linalg.norm(v)
        q[:, j] = v / r[j, j]
    y = q.T @ g
    w = np.zeros(k)
    for j in reversed(range(k)):
        w[j] = (y[j] - r[j, j + 1 :] @ w[j + 1 :]) / r[j, j]
    return w


class TestPivotedQR:
    def test_identity_columns(self):
        qr = qr_column_pivot(np.eye(3))
        assert sorted(qr.perm.tolist()) == [0, 1, 2]
        np.testing.assert_allclose(qr.r_diag, 1.0)
        np.testing.assert_allclose(qr.reconstruct(), np.eye(3)[:, qr.perm], atol=1e-14)

    def test_two_column_hand_case(self):
        # Column 0 has norm 2 > 1, so it pivots first; column 1 is parallel,
        # leaving a zero second diagonal.
        b = np.array([[2.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        qr = qr_column_pivot(b)
        assert qr.perm[0] == 0
        np.testing.assert_allclose(qr.r_diag, [2.0, 0.0], atol=1e-15)

    def test_random_reconstruction_and_orthogonality(self, rng):
        b = rng.normal(size=(200, 50))
        qr = qr_column_pivot(b)
        q = qr.thin_q()
        rel = np.linalg.norm(b[:, qr.perm] - q @ qr.r) / np.linalg.norm(b)
        assert rel <= 1e-12
        assert np.max(np.abs(q.T @ q - np.eye(50))) <= 1e-12
        assert np.all(np.diff(qr.r_diag) <= 1e-14)

    def test_wide_matrix_rejected(self):
        with pytest.raises(ValueError, match="rows"):
            qr_column_pivot(np.ones((3, 5)))

    def test_zero_matrix_valid(self):
        qr = qr_column_pivot(np.zeros((4, 3)))
        np.testing.assert_array_equal(qr.r_diag, 0.0)
        np.testing.assert_allclose(qr.reconstruct(), 0.0)

    def test_nonfinite_rejected(self):
        b = np.ones((4, 2))
        b[2, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            qr_column_pivot(b)

    def test_apply_qt_inverts_apply_q(self, rng):
        b = rng.normal(size=(30, 8))
        qr = qr_column_pivot(b)
        y = rng.normal(size=30)
        np.testing.assert_allclose(qr.apply_qt(qr.apply_q(y)), y, atol=1e-12)


class TestEstimateRank:
    def test_identity_full_rank(self):
        qr = qr_column_pivot(np.eye(6))
        for tol in (1e-14, 1e-10, 0.5):
            assert estimate_rank(qr, tol) == 6

    def test_rank_one_outer_product(self, rng):
        b = np.outer(rng.normal(size=50), rng.normal(size=10))
        assert estimate_rank(qr_column_pivot(b), 1e-10) == 1
        # independent oracle: Jacobi eigenvalues of the Gram matrix, counted
        # at the same relative tolerance on squared singular values
        eig = jacobi_gram_eigenvalues(b)
        assert np.count_nonzero(eig > 1e-10 * eig[0]) == 1

    def test_constructed_rank_seven(self, rng):
        b = rng.normal(size=(100, 7)) @ rng.normal(size=(7, 20))
        assert estimate_rank(qr_column_pivot(b), 1e-10) == 7

    def test_zero_matrix_rank_zero(self):
        assert estimate_rank(qr_column_pivot(np.zeros((4, 3))), 1e-10) == 0

    def test_tolerance_range_checked(self):
        qr = qr_column_pivot(np.eye(3))
        with pytest.raises(ValueError):
            estimate_rank(qr, 0.0)
        with pytest.raises(ValueError):
            estimate_rank(qr, 1.0)


class TestR22Bound:
    def test_full_block_equals_spectral_norm(self, rng):
        b = rng.normal(size=(20, 6))
        qr = qr_column_pivot(b)
        sigma, r22 = r22_bound_check(qr, 6)
        assert sigma == pytest.approx(np.linalg.norm(b, 2), rel=1e-12)
        assert r22 == pytest.approx(np.linalg.norm(b, 2), rel=1e-12)

    def test_bound_holds_all_ell(self, rng):
        b = rng.normal(size=(40, 10))
        qr = qr_column_pivot(b)
        sv = np.linalg.svd(b, compute_uv=False)
        for ell in range(1, 11):
            sigma, r22 = r22_bound_check(qr, ell)
            assert sigma == pytest.approx(sv[10 - ell], abs=1e-10)
            assert sigma <= r22 + 1e-10

    def test_constructed_rank_three(self, rng):
        b = rng.normal(size=(40, 3)) @ rng.normal(size=(3, 10))
        qr = qr_column_pivot(b)
        sigma, r22 = r22_bound_check(qr, 7)
        assert sigma <= 1e-10
        assert r22 <= 1e-8 * np.linalg.norm(b, 2)

    def test_ell_out_of_range(self, rng):
        qr = qr_column_pivot(rng.normal(size=(5, 3)))
        with pytest.raises(IndexError):
            r22_bound_check(qr, 0)
        with pytest.raises(IndexError):
            r22_bound_check(qr, 4)


class TestCovarianceRank:
    def test_orthogonal_columns_full_rank(self):
        q, _ = np.linalg.qr(np.random.default_rng(3).normal(size=(40, 8)))
        assert covariance_rank(q, 1e-10) == 8

    def test_duplicated_column_drops_rank(self, rng):
        b = rng.normal(size=(40, 8))
        b[:, 5] = b[:, 2]
        assert covariance_rank(b, 1e-10) == 7

    def test_zero_matrix(self):
        assert covariance_rank(np.zeros((5, 3))) == 0


class TestRidge:
    def test_mean_as_least_squares(self):
        ro = ridge_fit(np.ones((4, 1)), np.array([1.0, 2.0, 3.0, 4.0]), 0.0)
        np.testing.assert_allclose(ro.w, [2.5], atol=1e-14)

    def test_consistent_system_recovered(self, rng):
        x = rng.normal(size=(25, 6))
        w0 = rng.normal(size=6)
        ro = ridge_fit(x, x @ w0, 0.0)
        np.testing.assert_allclose(ro.w, w0, atol=1e-10)

    def test_scalar_closed_form(self, rng):
        for _ in range(50):
            x, g = rng.normal(size=2)
            lam = float(rng.uniform(0.0, 2.0))
            ro = ridge_fit(np.array([[x]]), np.array([g]), lam)
            assert ro.w[0] == pytest.approx(x * g / (x * x + lam), rel=1e-13)

    def test_rank_deficient_lambda_zero_raises(self, rng):
        x = rng.normal(size=(20, 3))
        x = np.column_stack([x, x[:, 0] + x[:, 1]])
        with pytest.raises(SingularMatrixError) as exc:
            ridge_fit(x, rng.normal(size=20), 0.0)
        assert exc.value.estimated_rank == 3

    def test_matches_gram_schmidt_oracle(self, rng):
        for _ in range(10):
            x = rng.normal(size=(30, 8))
            g = rng.normal(size=30)
            ro = ridge_fit(x, g, 0.0)
            w_oracle = gram_schmidt_lstsq(x, g)
            np.testing.assert_allclose(ro.w, w_oracle, rtol=1e-10, atol=1e-12)

    def test_shrinkage_monotone(self, rng):
        x = rng.normal(size=(40, 6))
        g = rng.normal(size=40)
        norms = [
            np.linalg.norm(ridge_fit(x, g, lam).w)
            for lam in (0.0, 1e-4, 1e-2, 1.0, 100.0)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))

    def test_bias_column(self, rng):
        x = rng.normal(size=(50, 2))
        g = 3.0 * x[:, 0] - x[:, 1] + 7.0
        ro = ridge_fit(x, g, 0.0, include_bias=True)
        np.testing.assert_allclose(ro.w, [3.0, -1.0, 7.0], atol=1e-10)
        np.testing.assert_allclose(predict(x, ro), g, atol=1e-10)


class TestPredict:
    def test_zero_weights(self, rng):
        from shiftrc.linalg import Readout

        x = rng.normal(size=(10, 4))
        out = predict(x, Readout(w=np.zeros(4), ridge_lambda=0.0))
        np.testing.assert_array_equal(out, 0.0)

    def test_identity_design(self):
        from shiftrc.linalg import Readout

        g = np.array([3.0, -1.0, 2.0])
        out = predict(np.eye(3), Readout(w=g, ridge_lambda=0.0))
        np.testing.assert_array_equal(out, g)

    def test_projection_property(self, rng):
        x = rng.normal(size=(30, 5))
        g = x @ rng.normal(size=5)
        ro = ridge_fit(x, g, 0.0)
        np.testing.assert_allclose(predict(x, ro), g, atol=1e-10)

    def test_shape_mismatch(self, rng):
        from shiftrc.linalg import Readout

        with pytest.raises(ValueError, match="columns"):
            predict(rng.normal(size=(5, 3)), Readout(w=np.zeros(4), ridge_lambda=0.0))


class TestNrmse:
    def test_perfect_fit_both_modes(self):
        g = np.array([1.0, -2.0, 3.0])
        assert nrmse(g, g) == 0.0
        assert nrmse(g, g, NrmseMode.PAPER_LITERAL) == 0.0

    def test_global_hand_value(self):
        assert nrmse([2.0, 2.0], [0.0, 0.0]) == pytest.approx(1.0, abs=1e-15)

    def test_literal_hand_value(self):
        got = nrmse([1.0, 2.0], [0.0, 2.0], NrmseMode.PAPER_LITERAL)
        assert got == pytest.approx(np.sqrt(0.5), abs=1e-15)

    def test_literal_skips_near_zero_targets(self):
        got = nrmse([1.0, 1e-12, 2.0], [0.0, 5.0, 2.0], NrmseMode.PAPER_LITERAL)
        assert got == pytest.approx(np.sqrt(0.5), abs=1e-15)

    def test_global_degenerate_target(self):
        with pytest.raises(DegenerateTargetError):
            nrmse([0.0, 0.0], [1.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nrmse([1.0, 2.0], [1.0])


def test_r_diag_csv(tmp_path, rng):
    qr = qr_column_pivot(rng.normal(size=(10, 4)))
    path = tmp_path / "rdiag.csv"
    save_r_diag_csv(path, qr.r_diag)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "k,r_kk_abs"
    assert len(lines) == 5
    assert float(lines[1].split(",")[1]) == pytest.approx(qr.r_diag[0])
