"""Dense linear-algebra kernel.

Householder QR with greedy column pivoting is the workhorse of the toolkit:
its permutation orders columns from most to least linearly independent, the
magnitudes of the R diagonal expose near rank deficiency, and the ridge
solver reuses the same factorization on a stacked system so that normal
equations are never formed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateTargetError, SingularMatrixError

logger = logging.getLogger(__name__)

# Residual column norms are maintained by downdating; once a downdated value
# falls below this fraction of the last freshly computed norm, cancellation
# makes it untrustworthy and the norm is recomputed from the active block.
NORM_RECOMPUTE_GUARD = 1e-6

# Default relative tolerance for numerical-rank decisions.
RANK_TOL_DEFAULT = 1e-10


class NrmseMode(Enum):
    """Normalization convention for the root-mean-square error."""

    GLOBAL = "global"
    PAPER_LITERAL = "paper-literal"


@dataclass
class PivotedQR:
    """QR factorization with column pivoting: ``B[:, perm] == Q @ R``.

    Q is held implicitly as a sequence of Householder reflectors. ``packed``
    stores the working array in transposed orientation (shape ``(M, T)``):
    entry ``packed[j, i]`` with ``i <= j < M`` is ``R[i, j]`` and
    ``packed[k, k+1:]`` holds the tail of the k-th reflector (its leading
    component is an implicit 1).
    """

    packed: np.ndarray
    taus: np.ndarray
    perm: np.ndarray
    r_diag: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        """Shape ``(T, M)`` of the factored matrix."""
        m, t = self.packed.shape
        return t, m

    @property
    def r(self) -> np.ndarray:
        """The upper-triangular factor, trimmed to its nonzero M x M block."""
        m = self.packed.shape[0]
        return np.triu(self.packed[:, :m].T)

    def apply_qt(self, y: np.ndarray) -> np.ndarray:
        """Return ``Q.T @ y`` for a length-T vector or ``(T, n)`` matrix."""
        t, m = self.shape
        out = np.array(y, dtype=float)
        if out.shape[0] != t:
            raise ValueError(f"expected leading dimension {t}, got {out.shape[0]}")
        for k in range(m):
            self._apply_reflector(out, k)
        return out

    def apply_q(self, y: np.ndarray) -> np.ndarray:
        """Return ``Q @ y`` for a length-T vector or ``(T, n)`` matrix."""
        t, m = self.shape
        out = np.array(y, dtype=float)
        if out.shape[0] != t:
            raise ValueError(f"expected leading dimension {t}, got {out.shape[0]}")
        for k in reversed(range(m)):
            self._apply_reflector(out, k)
        return out

    def thin_q(self) -> np.ndarray:
        """Materialize the first M columns of Q (the economy factor)."""
        t, m = self.shape
        eye = np.zeros((t, m))
        np.fill_diagonal(eye, 1.0)
        return self.apply_q(eye)

    def reconstruct(self) -> np.ndarray:
        """Return ``Q @ R``, i.e. the factored matrix with permuted columns."""
        return self.thin_q() @ self.r

    def _apply_reflector(self, y: np.ndarray, k: int) -> None:
        tau = self.taus[k]
        if tau == 0.0:
            return
        tail = self.packed[k, k + 1 :]
        s = y[k] + tail @ y[k + 1 :]
        y[k] -= tau * s
        if tail.size:
            y[k + 1 :] -= np.multiply.outer(tail, tau * s)


def _householder(x: np.ndarray) -> tuple[float, float]:
    """Overwrite ``x`` with the reflector tail and return ``(tau, beta)``.

    On return ``x[0]`` is conceptually 1 (callers store beta there instead)
    and ``(I - tau v v^T) x_old = beta e_1`` with ``|beta| = ||x_old||``.
    """
    norm_x = np.linalg.norm(x)
    if norm_x == 0.0:
        return 0.0, 0.0
    alpha = x[0]
    beta = -np.copysign(norm_x, alpha)
    x /= alpha - beta
    x[0] = 1.0
    return (beta - alpha) / beta, beta


def qr_column_pivot(b: np.ndarray) -> PivotedQR:
    """Factor a tall matrix as ``B[:, perm] = Q R`` with greedy pivoting.

    At each step the remaining column with the largest residual 2-norm is
    chosen, so ``|R_kk|`` is non-increasing and the permutation ranks columns
    by linear independence. Residual norms are downdated after each
    reflector and recomputed when cancellation would corrupt them.

    Raises:
        ValueError: if the matrix is wider than tall or contains non-finite
            entries. A zero matrix is valid and yields all-zero ``r_diag``.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={b.ndim}")
    t, m = b.shape
    if t < m:
        raise ValueError(f"need at least as many rows as columns, got {t}x{m}")
    if not np.all(np.isfinite(b)):
        raise ValueError("matrix contains non-finite entries")

    # Transposed working copy: columns of B are contiguous rows here, which
    # keeps every hot operation on C-contiguous memory.
    work = np.array(b.T, dtype=float, order="C")
    perm = np.arange(m)
    taus = np.zeros(m)
    r_diag = np.zeros(m)
    norms = np.linalg.norm(work, axis=1)
    norms_ref = norms.copy()

    for k in range(m):
        j = k + int(np.argmax(norms[k:]))
        if j != k:
            work[[k, j]] = work[[j, k]]
            perm[[k, j]] = perm[[j, k]]
            norms[[k, j]] = norms[[j, k]]
            norms_ref[[k, j]] = norms_ref[[j, k]]

        col = work[k, k:]
        tau, beta = _householder(col)
        taus[k] = tau
        r_diag[k] = abs(beta)
        if tau != 0.0 and k + 1 < m:
            block = work[k + 1 :, k:]
            coeff = block @ col
            block -= np.multiply.outer(tau * coeff, col)
        work[k, k] = beta

        if k + 1 < m:
            new_row = work[k + 1 :, k]
            sq = norms[k + 1 :] ** 2 - new_row**2
            np.maximum(sq, 0.0, out=sq)
            updated = np.sqrt(sq)
            stale = updated < NORM_RECOMPUTE_GUARD * norms_ref[k + 1 :]
            if np.any(stale):
                rows = np.nonzero(stale)[0] + k + 1
                fresh = np.linalg.norm(work[rows, k + 1 :], axis=1)
                updated[stale] = fresh
                norms_ref[rows] = fresh
            norms[k + 1 :] = updated

    qr = PivotedQR(packed=work, taus=taus, perm=perm, r_diag=r_diag)
    _log_row_dominance(qr)
    return qr


def _log_row_dominance(qr: PivotedQR) -> None:
    # Pivoting makes |R_kk| the largest entry of row k in exact arithmetic;
    # rounding can break this by ~eps, which is logged rather than raised.
    r = qr.r
    m = r.shape[0]
    if m < 2 or qr.r_diag[0] == 0.0:
        return
    tail_max = np.array(
        [np.max(np.abs(r[k, k + 1 :]), initial=0.0) for k in range(m)]
    )
    excess = tail_max - qr.r_diag
    worst = float(np.max(excess))
    if worst > 0.0:
        logger.warning(
            "pivoted QR row-dominance violated by %.3e (relative %.3e)",
            worst,
            worst / qr.r_diag[0],
        )


def estimate_rank(qr: PivotedQR, tol_rel: float = RANK_TOL_DEFAULT) -> int:
    """Numerical rank: the largest k with ``|R_kk| > tol_rel * |R_00|``."""
    if not 0.0 < tol_rel < 1.0:
        raise ValueError(f"tol_rel must be in (0, 1), got {tol_rel}")
    r = qr.r_diag
    if r.size == 0 or r[0] == 0.0:
        return 0
    above = np.nonzero(r > tol_rel * r[0])[0]
    return int(above[-1]) + 1 if above.size else 0


def r22_bound_check(qr: PivotedQR, ell: int) -> tuple[float, float]:
    """Return ``(sigma_{M-ell+1}, ||R22||_2)`` for the trailing ell x ell block.

    The singular value is that of the factored source matrix; it is computed
    from R, whose singular values equal the source's because Q is orthogonal
    and the permutation is unitary. Callers assert ``sigma <= r22_norm``
    (up to roundoff): a small trailing block certifies rank deficiency.
    """
    t, m = qr.shape
    if not 1 <= ell <= m:
        raise IndexError(f"ell must be in 1..{m}, got {ell}")
    r = qr.r
    r22 = r[m - ell :, m - ell :]
    r22_norm = float(np.linalg.norm(r22, 2))
    sigma = float(np.linalg.svd(r, compute_uv=False)[m - ell])
    return sigma, r22_norm


def covariance_rank(states, tol_rel: float = RANK_TOL_DEFAULT) -> int:
    """Rank of the state covariance, counted on squared singular values.

    Accepts a plain matrix or any object with a ``values`` array (such as a
    state matrix). The singular values are taken from the matrix itself,
    never from the explicitly formed Gramian, which would square the
    condition number.
    """
    values = np.asarray(getattr(states, "values", states), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("matrix contains non-finite entries")
    s = np.linalg.svd(values, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    sq = s**2
    return int(np.count_nonzero(sq > tol_rel * sq[0]))


@dataclass
class Readout:
    """Trained output weights together with their ridge parameter."""

    w: np.ndarray
    ridge_lambda: float
    bias_included: bool = False


def ridge_fit(
    x: np.ndarray,
    g: np.ndarray,
    ridge_lambda: float,
    include_bias: bool = False,
) -> Readout:
    """Solve ``min ||X w - g||^2 + lambda ||w||^2`` through a pivoted QR.

    The solution comes from factoring the stacked system
    ``[X; sqrt(lambda) I]`` against ``[g; 0]``; no normal equations are
    formed. With ``ridge_lambda == 0`` the design must have full column rank.

    Raises:
        SingularMatrixError: lambda is zero and the design is rank deficient
            (the message names the estimated rank).
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D design matrix, got ndim={x.ndim}")
    if g.ndim != 1 or g.shape[0] != x.shape[0]:
        raise ValueError(
            f"target shape {g.shape} does not match design rows {x.shape[0]}"
        )
    if ridge_lambda < 0.0:
        raise ValueError(f"ridge parameter must be >= 0, got {ridge_lambda}")

    design = np.column_stack([x, np.ones(x.shape[0])]) if include_bias else x
    k = design.shape[1]
    stacked = np.vstack([design, np.sqrt(ridge_lambda) * np.eye(k)])
    rhs = np.concatenate([g, np.zeros(k)])

    qr = qr_column_pivot(stacked)
    if ridge_lambda == 0.0:
        rank = estimate_rank(qr, RANK_TOL_DEFAULT)
        if rank < k:
            raise SingularMatrixError(rank, k)
    qtg = qr.apply_qt(rhs)[:k]
    z = solve_triangular(qr.r, qtg)
    w = np.empty(k)
    w[qr.perm] = z
    return Readout(w=w, ridge_lambda=float(ridge_lambda), bias_included=include_bias)


def predict(x: np.ndarray, readout: Readout) -> np.ndarray:
    """Apply a trained readout: ``X @ w`` (bias column appended if flagged)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D design matrix, got ndim={x.ndim}")
    design = np.column_stack([x, np.ones(x.shape[0])]) if readout.bias_included else x
    if design.shape[1] != readout.w.shape[0]:
        raise ValueError(
            f"design has {design.shape[1]} columns, readout expects {readout.w.shape[0]}"
        )
    return design @ readout.w


def nrmse(g: np.ndarray, h: np.ndarray, mode: NrmseMode = NrmseMode.GLOBAL) -> float:
    """Normalized root-mean-square error between target ``g`` and output ``h``.

    GLOBAL normalizes the summed squared error by the summed squared target,
    which stays finite for sign-changing targets. PAPER_LITERAL normalizes
    each sample by its own target value, skipping samples with ``|g| < 1e-9``
    and shrinking the sample count accordingly; it is only meaningful for
    targets bounded away from zero.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.shape != h.shape or g.ndim != 1 or g.size < 1:
        raise ValueError(f"need equal-length 1-D sequences, got {g.shape} and {h.shape}")
    mode = NrmseMode(mode)
    if mode is NrmseMode.GLOBAL:
        denom = float(np.sum(g * g))
        if denom < 1e-18:
            raise DegenerateTargetError(
                f"target energy {denom:.3e} below 1e-18; NRMSE undefined"
            )
        return float(np.sqrt(np.sum((g - h) ** 2) / denom))
    keep = np.abs(g) >= 1e-9
    n_keep = int(np.count_nonzero(keep))
    if n_keep == 0:
        raise DegenerateTargetError("all target samples below 1e-9 in magnitude")
    ratios = (g[keep] - h[keep]) / g[keep]
    return float(np.sqrt(np.sum(ratios**2) / n_keep))


def save_r_diag_csv(path, r_diag) -> None:
    """Write a pivot spectrum ``|R_kk|`` as a two-column CSV."""
    lines = ["k,r_kk_abs"]
    lines += [f"{k},{float(v):.17g}" for k, v in enumerate(r_diag)]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
