"""Time-shift augmentation and column selection.

Augments a state matrix with lagged copies of every node column and selects
a subset of (node, shift) columns either by pivoted-QR ranking or uniformly
at random.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .linalg import qr_column_pivot
from .reservoir import StateMatrix


class SelectionMethod(Enum):
    RRQR = "rrqr"
    RANDOM = "random"


@dataclass
class ShiftedMatrix:
    """All (node, shift) columns over the rows where every lag is defined.

    Column order is shift-major: the shift-0 copies of all nodes first, then
    shift 1, and so on up to ``tau_max``. Row t of a shift-s column holds the
    source entry at row ``t + tau_max - s``.
    """

    values: np.ndarray
    columns: list[tuple[int, int]]
    tau_max: int

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]


def build_shifted_matrix(source: StateMatrix, tau_max: int) -> ShiftedMatrix:
    """Stack lagged copies of every node column, shifts 0..tau_max inclusive.

    The first ``tau_max`` source rows are dropped so that every column is
    fully defined without padding.
    """
    if tau_max < 0:
        raise ValueError(f"tau_max must be >= 0, got {tau_max}")
    t, m = source.values.shape
    if t <= tau_max:
        raise ValueError(f"need more than tau_max={tau_max} rows, have {t}")
    t_out = t - tau_max
    values = np.empty((t_out, m * (tau_max + 1)))
    columns: list[tuple[int, int]] = []
    for shift in range(tau_max + 1):
        start = tau_max - shift
        values[:, shift * m : (shift + 1) * m] = source.values[start : start + t_out]
        columns.extend((node, shift) for node in source.node_ids)
    return ShiftedMatrix(values=values, columns=columns, tau_max=tau_max)


@dataclass
class SelectionResult:
    """Ordered set of retained (node, shift) columns plus diagnostics."""

    method: SelectionMethod
    retained: list[tuple[int, int]]
    pivot_order: list[tuple[int, int]] | None = None
    r_diag: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        if len(set(self.retained)) != len(self.retained):
            raise ValueError("retained pairs must be distinct")

    def to_json_dict(self) -> dict:
        out = {
            "method": self.method.value,
            "m_red": len(self.retained),
            "retained": [[n, s] for n, s in self.retained],
        }
        if self.r_diag is not None:
            out["r_diag"] = [float(v) for v in self.r_diag]
        if self.seed is not None:
            out["seed"] = int(self.seed)
        return out

    def save_json(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def rrqr_select(shifted: ShiftedMatrix, m_red: int) -> SelectionResult:
    """Keep the ``m_red`` most linearly independent columns.

    Runs the pivoted QR on the shifted matrix; the pivot order ranks columns
    from most to least independent and the first ``m_red`` are retained.
    """
    c = shifted.n_columns
    if not 1 <= m_red <= c:
        raise ValueError(f"m_red must be in 1..{c}, got {m_red}")
    qr = qr_column_pivot(shifted.values)
    order = [shifted.columns[j] for j in qr.perm]
    return SelectionResult(
        method=SelectionMethod.RRQR,
        retained=order[:m_red],
        pivot_order=order,
        r_diag=qr.r_diag.copy(),
    )


def random_select(shifted: ShiftedMatrix, m_red: int, seed: int) -> SelectionResult:
    """Keep ``m_red`` distinct columns drawn uniformly without replacement."""
    c = shifted.n_columns
    if not 1 <= m_red <= c:
        raise ValueError(f"m_red must be in 1..{c}, got {m_red}")
    idx = np.random.default_rng(seed).choice(c, size=m_red, replace=False)
    return SelectionResult(
        method=SelectionMethod.RANDOM,
        retained=[shifted.columns[j] for j in idx],
        seed=int(seed),
    )


@dataclass
class ReducedMatrix:
    """Retained columns in retained order, carrying their (node, shift) labels."""

    values: np.ndarray
    columns: list[tuple[int, int]]


def reduce_columns(shifted: ShiftedMatrix, selection) -> ReducedMatrix:
    """Materialize the retained columns of a shifted matrix.

    ``selection`` may be a SelectionResult or a plain sequence of
    (node, shift) pairs; order is preserved.

    Raises:
        KeyError: a pair does not name a column of the shifted matrix.
    """
    pairs = selection.retained if isinstance(selection, SelectionResult) \
        else [tuple(p) for p in selection]
    index = {pair: j for j, pair in enumerate(shifted.columns)}
    try:
        cols = [index[p] for p in pairs]
    except KeyError as exc:
        raise KeyError(f"unknown (node, shift) pair {exc.args[0]}") from None
    return ReducedMatrix(values=shifted.values[:, cols], columns=list(pairs))
