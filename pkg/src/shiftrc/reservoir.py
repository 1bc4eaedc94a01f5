"""Reservoir simulation back-ends.

Two reservoirs produce a state matrix from a scalar drive: a leaky-tanh
recurrent network iterated as a map, and a time-multiplexed opto-electronic
delay oscillator whose virtual nodes are samples of a single delayed
feedback loop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import DivergenceError


@dataclass
class StateMatrix:
    """Node time series, one row per retained input step, one column per node."""

    values: np.ndarray
    node_ids: list[int]
    washout: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got ndim={self.values.ndim}")
        m = self.values.shape[1]
        if sorted(self.node_ids) != list(range(m)):
            raise ValueError(f"node_ids must cover 0..{m - 1} exactly")

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]


def _sparse_uniform(m: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Length-m vector, round(fraction*m) entries uniform in [-1, 1], rest zero."""
    n_nonzero = round(fraction * m)
    values = np.zeros(m)
    positions = rng.choice(m, size=n_nonzero, replace=False)
    values[positions] = rng.uniform(-1.0, 1.0, size=n_nonzero)
    return values


def generate_mask(m: int, theta: int, f_w: float, rng_seed: int) -> np.ndarray:
    """Sparse input mask for the delay reservoir.

    Exactly ``round(f_w * m)`` entries are nonzero, drawn uniform in [-1, 1]
    at positions chosen without replacement. The mask is interpreted as
    piecewise constant over node intervals of length ``theta``.
    """
    if not 0.0 < f_w <= 1.0:
        raise ValueError(f"f_w must be in (0, 1], got {f_w}")
    if theta < 1:
        raise ValueError(f"theta must be >= 1, got {theta}")
    if round(f_w * m) == 0:
        raise ValueError(
            f"round(f_w * m) = 0 for f_w={f_w}, m={m}; the reservoir would "
            "receive no input"
        )
    return _sparse_uniform(m, f_w, np.random.default_rng(rng_seed))


def generate_input_weights(m: int, f_w: float, rng_seed: int) -> np.ndarray:
    """Sparse input weight vector for the tanh reservoir (same draw as a mask)."""
    if not 0.0 < f_w <= 1.0:
        raise ValueError(f"f_w must be in (0, 1], got {f_w}")
    if round(f_w * m) == 0:
        raise ValueError(
            f"round(f_w * m) = 0 for f_w={f_w}, m={m}; the reservoir would "
            "receive no input"
        )
    return _sparse_uniform(m, f_w, np.random.default_rng(rng_seed))


def generate_adjacency(
    m: int,
    f_a: float,
    spectral_radius: float,
    rng_seed: int,
    max_attempts: int = 100,
) -> np.ndarray:
    """Random sparse adjacency with a prescribed spectral radius.

    Off-diagonal entries are uniform in [-1, 1] with a fraction ``f_a``
    nonzero and the diagonal zero; any all-zero row gets one extra entry so
    every node receives at least one input, and the matrix is rescaled so
    its spectral radius equals the request.

    Raises:
        ValueError: the raw draw had spectral radius zero in
            ``max_attempts`` consecutive attempts.
    """
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    if not 0.0 < f_a <= 1.0:
        raise ValueError(f"f_a must be in (0, 1], got {f_a}")
    if spectral_radius <= 0.0:
        raise ValueError(f"spectral_radius must be positive, got {spectral_radius}")
    rng = np.random.default_rng(rng_seed)
    n_offdiag = m * (m - 1)
    n_nonzero = round(f_a * n_offdiag)
    for _ in range(max_attempts):
        a = np.zeros((m, m))
        flat = rng.choice(n_offdiag, size=n_nonzero, replace=False)
        rows = flat // (m - 1)
        rem = flat % (m - 1)
        cols = np.where(rem < rows, rem, rem + 1)
        a[rows, cols] = rng.uniform(-1.0, 1.0, size=n_nonzero)
        for i in np.nonzero(~a.any(axis=1))[0]:
            j = int(rng.integers(m - 1))
            j = j if j < i else j + 1
            a[i, j] = rng.uniform(-1.0, 1.0)
        rho = float(np.max(np.abs(np.linalg.eigvals(a))))
        if rho > 0.0:
            return a * (spectral_radius / rho)
    raise ValueError(
        f"spectral radius of the sparse draw was zero in {max_attempts} attempts"
    )


@dataclass
class TanhReservoirConfig:
    """Leaky-tanh recurrent network: state, adjacency and input weights."""

    m: int
    alpha: float
    a: np.ndarray
    w_in: np.ndarray
    f_a: float = 1.0
    f_w: float = 1.0
    spectral_radius: float = 0.5

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.w_in = np.asarray(self.w_in, dtype=float)
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.a.shape != (self.m, self.m):
            raise ValueError(f"adjacency shape {self.a.shape} != ({self.m}, {self.m})")
        if self.w_in.shape != (self.m,):
            raise ValueError(f"w_in shape {self.w_in.shape} != ({self.m},)")
        if np.any(np.diag(self.a) != 0.0):
            raise ValueError("adjacency diagonal must be zero")

    def as_dict(self) -> dict:
        return {
            "kind": "tanh",
            "m": self.m,
            "alpha": self.alpha,
            "f_a": self.f_a,
            "f_w": self.f_w,
            "spectral_radius": self.spectral_radius,
            "a": self.a.tolist(),
            "w_in": self.w_in.tolist(),
        }


def make_tanh_config(
    m: int = 50,
    alpha: float = 0.35,
    f_a: float = 0.5,
    f_w: float = 1.0,
    spectral_radius: float = 0.5,
    *,
    adjacency_seed: int,
    input_seed: int,
) -> TanhReservoirConfig:
    """Generate a random tanh reservoir with the default operating point."""
    a = generate_adjacency(m, f_a, spectral_radius, adjacency_seed)
    w_in = generate_input_weights(m, f_w, input_seed)
    return TanhReservoirConfig(
        m=m, alpha=alpha, a=a, w_in=w_in, f_a=f_a, f_w=f_w,
        spectral_radius=spectral_radius,
    )


def run_tanh_reservoir(
    cfg: TanhReservoirConfig,
    drive,
    washout: int,
    initial_state=None,
) -> StateMatrix:
    """Iterate the leaky-tanh map over a drive sequence.

    chi <- (1 - alpha) chi + alpha tanh(A chi + w_in s + 1), starting from
    zero (or ``initial_state``); the first ``washout`` rows are discarded.
    The +1 bias inside the tanh is part of the node model.
    """
    drive = np.asarray(drive, dtype=float)
    if drive.ndim != 1:
        raise ValueError("drive must be 1-D")
    n = drive.shape[0]
    if n <= washout:
        raise ValueError(f"drive length {n} must exceed washout {washout}")
    chi = np.zeros(cfg.m) if initial_state is None else np.array(initial_state, dtype=float)
    alpha = cfg.alpha
    keep = 1.0 - alpha
    out = np.empty((n - washout, cfg.m))
    for i, s in enumerate(drive):
        chi = keep * chi + alpha * np.tanh(cfg.a @ chi + cfg.w_in * s + 1.0)
        if i >= washout:
            out[i - washout] = chi
    if not np.all(np.isfinite(out)):
        bad = int(np.nonzero(~np.isfinite(out).all(axis=1))[0][0]) + washout
        raise DivergenceError(bad, "tanh reservoir state")
    return StateMatrix(values=out, node_ids=list(range(cfg.m)), washout=washout)


@dataclass
class OEOConfig:
    """Opto-electronic delay oscillator with time-multiplexed virtual nodes.

    The feedback loop is a low-pass filter (time constant ``4 * theta``)
    driven by a sin^2 nonlinearity of the state delayed by ``m * theta``;
    the mask weights the drive over node intervals of ``theta`` integration
    steps. ``sample_offset`` picks the step inside each node interval at
    which the node state is read (default: the interval's last step).
    """

    m: int
    theta: int = 40
    beta: float = 0.8
    phi: float = 0.2
    rho: float = 0.4
    f_w: float = 0.4
    mask: np.ndarray = field(default=None)
    sample_offset: int | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.theta < 1 or self.theta != int(self.theta):
            raise ValueError(f"theta must be a positive integer, got {self.theta}")
        self.theta = int(self.theta)
        if self.mask is None:
            raise ValueError("mask is required; use generate_mask")
        self.mask = np.asarray(self.mask, dtype=float)
        if self.mask.shape != (self.m,):
            raise ValueError(f"mask shape {self.mask.shape} != ({self.m},)")
        nz = self.mask[self.mask != 0.0]
        if nz.size != round(self.f_w * self.m):
            raise ValueError(
                f"mask has {nz.size} nonzero entries, expected "
                f"round(f_w * m) = {round(self.f_w * self.m)}"
            )
        if nz.size and np.max(np.abs(nz)) > 1.0:
            raise ValueError("nonzero mask entries must lie in [-1, 1]")
        if self.sample_offset is not None and not 1 <= self.sample_offset <= self.theta:
            raise ValueError(
                f"sample_offset must be in 1..{self.theta}, got {self.sample_offset}"
            )

    @property
    def tau_l(self) -> int:
        return 4 * self.theta

    @property
    def tau_d(self) -> int:
        return self.m * self.theta

    @property
    def tau_in(self) -> int:
        return self.m * self.theta

    def as_dict(self) -> dict:
        return {
            "kind": "oeo",
            "m": self.m,
            "theta": self.theta,
            "beta": self.beta,
            "phi": self.phi,
            "rho": self.rho,
            "f_w": self.f_w,
            "sample_offset": self.sample_offset,
            "mask": self.mask.tolist(),
        }


def make_oeo_config(
    m: int = 10,
    theta: int = 40,
    beta: float = 0.8,
    phi: float = 0.2,
    rho: float = 0.4,
    f_w: float = 0.4,
    sample_offset: int | None = None,
    *,
    mask_seed: int,
) -> OEOConfig:
    """Generate a delay-oscillator reservoir with a fresh random mask."""
    mask = generate_mask(m, theta, f_w, mask_seed)
    return OEOConfig(
        m=m, theta=theta, beta=beta, phi=phi, rho=rho, f_w=f_w,
        mask=mask, sample_offset=sample_offset,
    )


def run_oeo_reservoir(
    cfg: OEOConfig,
    drive,
    washout: int,
    v0: float = 0.0,
) -> StateMatrix:
    """Integrate the delay oscillator and sample its virtual nodes.

    The delay equation tau_L v' = -v + beta sin^2(v(t - tau_d) + phi +
    rho M(t) s(t)) is advanced with Heun's method at unit step, one mask
    period per input sample, from zero delay history. Because the
    nonlinearity involves only the delayed state, the two-stage Heun update
    collapses to a linear recurrence v[t+1] = a v[t] + c1 F[t] + c2 F[t+1]
    within each delay period, which is evaluated period-by-period with an
    IIR filter; the arithmetic is the exact Heun update, regrouped.

    Node j of input step n is v at step n*tau_in + j*theta + sample_offset;
    the first ``washout`` input steps are discarded.
    """
    drive = np.asarray(drive, dtype=float)
    if drive.ndim != 1:
        raise ValueError("drive must be 1-D")
    n_in = drive.shape[0]
    if n_in <= washout:
        raise ValueError(f"drive length {n_in} must exceed washout {washout}")

    theta = cfg.theta
    tau_d = cfg.tau_d
    tau_in = cfg.tau_in
    tau_l = float(cfg.tau_l)

    # Heun coefficients for v' = (-v + F(t)) / tau_L at unit step.
    a = 1.0 - 1.0 / tau_l + 1.0 / (2.0 * tau_l * tau_l)
    c1 = (1.0 / (2.0 * tau_l)) * (1.0 - 1.0 / tau_l)
    c2 = 1.0 / (2.0 * tau_l)
    denom = np.array([1.0, -a])
    numer = np.array([1.0])

    total = n_in * tau_in
    # v_full[tau_d + t] = v(t); the leading tau_d zeros are the delay history.
    v_full = np.zeros(tau_d + total + 1)
    v_full[tau_d] = float(v0)

    mask_period = np.repeat(cfg.mask, theta)
    forcing_arg = np.empty(tau_d + 1)
    for n in range(n_in):
        base = n * tau_in
        forcing_arg[:tau_d] = (cfg.rho * drive[n]) * mask_period
        nxt = drive[n + 1] if n + 1 < n_in else drive[n_in - 1]
        forcing_arg[tau_d] = cfg.rho * nxt * cfg.mask[0]
        forcing_arg += cfg.phi
        forcing_arg += v_full[base : base + tau_d + 1]
        forcing = cfg.beta * np.sin(forcing_arg) ** 2
        b = c1 * forcing[:-1] + c2 * forcing[1:]
        seg, _ = lfilter(numer, denom, b, zi=np.array([a * v_full[tau_d + base]]))
        v_full[tau_d + base + 1 : tau_d + base + tau_in + 1] = seg

    if not np.all(np.isfinite(v_full)):
        bad = int(np.nonzero(~np.isfinite(v_full))[0][0]) - tau_d
        raise DivergenceError(bad, "delay oscillator state")

    offset = cfg.sample_offset if cfg.sample_offset is not None else theta
    sample_t = (
        np.arange(n_in)[:, None] * tau_in
        + np.arange(cfg.m)[None, :] * theta
        + offset
    )
    states = v_full[tau_d + sample_t]
    return StateMatrix(
        values=states[washout:], node_ids=list(range(cfg.m)), washout=washout
    )


def export_state_matrix(csv_path, state: StateMatrix, config: dict) -> None:
    """Write a state matrix as CSV plus a JSON echo of its configuration."""
    m = state.n_nodes
    header = "n," + ",".join(f"node_{j}" for j in range(m))
    lines = [header]
    for n, row in enumerate(state.values):
        lines.append(f"{n}," + ",".join(f"{v:.17g}" for v in row))
    csv_path = str(csv_path)
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    json_path = csv_path[: -len(".csv")] + ".config.json" if csv_path.endswith(".csv") \
        else csv_path + ".config.json"
    with open(json_path, "w", encoding="ascii") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
