"""Receding-horizon-like controller runtime and closed-loop experiments.

Timing: the disturbance w[k] enters x[k+1].  At step k the controller
measures x[k], forms the estimate w_e[k-1] = x[k] - x_r[k], then applies

    u[k]     = sum_{tau=1..T}   M[tau]   w_e[k-tau]
    x_r[k+1] = sum_{tau=1..T-1} R[tau+1] w_e[k-tau]

so row k of ``SimTrace.we_log`` holds w_e[k], available one step later.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import SimulationDiverged
from .feasibility import ClosedLoopMaps
from .kernels import get_backend
from .plant import Plant

OVERFLOW_GUARD = 1e12
LOG_FLOOR = 1e-15


def stack_maps(maps: ClosedLoopMaps) -> tuple[np.ndarray, np.ndarray]:
    """Row-stacked [R[2] .. R[T]] (n x n(T-1)) and [M[1] .. M[T]] (m x nT)."""
    n, m, T = maps.n, maps.m, maps.T
    Rstack = np.ascontiguousarray(np.transpose(maps.R[1:], (1, 0, 2)).reshape(n, n * (T - 1)))
    Mstack = np.ascontiguousarray(np.transpose(maps.M, (1, 0, 2)).reshape(m, n * T))
    return Rstack, Mstack


class ControllerState:
    """Per-step controller holding the last T disturbance estimates."""

    def __init__(self, maps: ClosedLoopMaps):
        self.maps = maps
        self.history = np.zeros((maps.T, maps.n))  # row tau-1 holds w_e[k-tau]
        self.xr_next = np.zeros(maps.n)
        self._Rstack, self._Mstack = stack_maps(maps)

    def step(self, x_measured) -> np.ndarray:
        we = np.asarray(x_measured, dtype=float) - self.xr_next
        self.history[1:] = self.history[:-1].copy()
        self.history[0] = we
        flat = self.history.reshape(-1)
        u = self._Mstack @ flat
        self.xr_next = self._Rstack @ flat[: self._Rstack.shape[1]]
        return u

    @property
    def last_estimate(self) -> np.ndarray:
        return self.history[0]


@dataclass
class SimTrace:
    """Time-aligned logs; row k holds step-k quantities."""

    x_log: np.ndarray
    u_log: np.ndarray
    we_log: np.ndarray
    w_log: np.ndarray
    scheme: str = "receding"

    @property
    def N(self) -> int:
        return self.x_log.shape[0]

    def write_csv(self, directory, log_magnitude: bool = True) -> list[str]:
        os.makedirs(directory, exist_ok=True)
        written = []
        for name in ("x", "u", "we", "w"):
            path = os.path.join(directory, f"{name}.csv")
            write_log_csv(path, getattr(self, f"{name}_log"))
            written.append(path)
        if log_magnitude:
            for name in ("x", "u"):
                path = os.path.join(directory, f"{name}_log10.csv")
                write_log_csv(path, np.log10(np.abs(getattr(self, f"{name}_log")) + LOG_FLOOR))
                written.append(path)
        return written


def write_log_csv(path, data: np.ndarray) -> None:
    data = np.atleast_2d(data)
    header = ",".join(["t"] + [str(i + 1) for i in range(data.shape[1])])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, row in enumerate(data):
            fh.write(",".join([str(t)] + [format(float(v), ".17g") for v in row]) + "\n")


def read_log_csv(path) -> np.ndarray:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return rows[:, 1:]


@dataclass(frozen=True)
class Impulse:
    site: int
    time: int
    magnitude: float = 1.0


@dataclass(frozen=True)
class WhiteNoise:
    seed: int = 0
    variance: float = 1.0


def disturbance_sequence(source, n: int, N: int) -> np.ndarray:
    """N x n disturbance array from an Impulse, WhiteNoise or explicit array."""
    if isinstance(source, Impulse):
        w = np.zeros((N, n))
        if 0 <= source.time < N:
            w[source.time, source.site] = source.magnitude
        return w
    if isinstance(source, WhiteNoise):
        rng = np.random.default_rng(source.seed)
        return np.sqrt(source.variance) * rng.standard_normal((N, n))
    if source is None:
        return np.zeros((N, n))
    w = np.asarray(source, dtype=float)
    if w.shape != (N, n):
        raise ValueError(f"disturbance array must be {N} x {n}, got {w.shape}")
    return w


def simulate(
    plant: Plant,
    maps: ClosedLoopMaps,
    disturbance,
    N: int,
    scheme: str = "receding",
    backend: str | None = None,
    guard: float = OVERFLOW_GUARD,
) -> SimTrace:
    """Roll the plant forward N steps under the chosen controller.

    Raises SimulationDiverged (carrying the truncated trace) when any state
    exceeds ``guard`` in magnitude.
    """
    if maps.n != plant.n or maps.m != plant.m:
        raise ValueError(f"maps ({maps.n}, {maps.m}) do not match plant ({plant.n}, {plant.m})")
    n, m = plant.n, plant.m
    w = np.ascontiguousarray(disturbance_sequence(disturbance, n, N))
    x_log = np.zeros((N, n))
    u_log = np.zeros((N, m))
    we_log = np.zeros((N, n))
    Rstack, Mstack = stack_maps(maps)
    A = np.ascontiguousarray(plant.A)
    B = np.ascontiguousarray(plant.B)
    kern = get_backend(backend)
    if scheme == "receding":
        done = kern.run_receding(A, B, Rstack, Mstack, w, x_log, u_log, we_log, guard)
    elif scheme == "naive":
        done = kern.run_naive(A, B, Mstack, w, x_log, u_log, we_log, guard)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    trace = SimTrace(x_log, u_log, we_log, w, scheme)
    if done < N:
        partial = SimTrace(x_log[:done], u_log[:done], we_log[:done], w[:done], scheme)
        raise SimulationDiverged(f"{scheme} simulation diverged at step {done}", step=done, trace=partial)
    return trace


def recursion_deltas(maps: ClosedLoopMaps, plant: Plant) -> np.ndarray:
    """Delta_tau = A R[tau] + B M[tau] - R[tau+1], tau = 1..T (R[T+1] = 0)."""
    nxt = np.concatenate([maps.R[1:], np.zeros((1, maps.n, maps.n))])
    return plant.A @ maps.R + plant.B @ maps.M - nxt


def perturb_maps(maps: ClosedLoopMaps, plant: Plant, deltas) -> ClosedLoopMaps:
    """Rebuild R so that R'[tau+1] = A R'[tau] + B M[tau] - Delta_tau; M is kept."""
    deltas = np.asarray(deltas, dtype=float)
    T, n = maps.T, maps.n
    if deltas.shape != (T - 1, n, n):
        raise ValueError(f"expected {T - 1} deltas of shape {n}x{n}, got {deltas.shape}")
    R = np.empty_like(maps.R)
    R[0] = np.eye(n)
    for tau in range(1, T):
        R[tau] = plant.A @ R[tau - 1] + plant.B @ maps.M[tau - 1] - deltas[tau - 1]
    return ClosedLoopMaps(R, maps.M)


def perturb_maps_fir(maps: ClosedLoopMaps, plant: Plant, deltas) -> ClosedLoopMaps:
    """Inject recursion errors while keeping A R[T] + B M[T] = 0.

    M absorbs a minimum-norm correction so that the perturbed pair still
    formally closes at T, but M alone no longer produces an FIR response.
    """
    deltas = np.asarray(deltas, dtype=float)
    T, n, m = maps.T, maps.n, maps.m
    if deltas.shape != (T - 1, n, n):
        raise ValueError(f"expected {T - 1} deltas of shape {n}x{n}, got {deltas.shape}")
    A, B = plant.A, plant.B
    powers = [np.eye(n)]
    for _ in range(T):
        powers.append(powers[-1] @ A)
    G = sum(powers[T - tau] @ deltas[tau - 1] for tau in range(1, T))
    if m:
        # block tau of the reachability matrix is A^(T-tau) B
        ctrb = np.hstack([powers[T - tau] @ B for tau in range(1, T + 1)])
        dM = np.linalg.lstsq(ctrb, G, rcond=None)[0].reshape(T, m, n)
    else:
        dM = np.zeros((T, 0, n))
    M = maps.M + dM
    R = np.empty_like(maps.R)
    R[0] = np.eye(n)
    for tau in range(1, T):
        R[tau] = A @ R[tau - 1] + B @ M[tau - 1] - deltas[tau - 1]
    return ClosedLoopMaps(R, M)


def random_deltas(n: int, T: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    """T-1 dense random matrices, each with induced infinity norm ``scale``."""
    D = rng.standard_normal((T - 1, n, n))
    norms = np.abs(D).sum(axis=2).max(axis=1)
    return D * (scale / norms)[:, None, None]


@dataclass
class SensitivityReport:
    delta_scale: float
    N: int
    site: int
    receding_final: float
    naive_final: float
    receding_trace: SimTrace
    naive_trace: SimTrace | None
    naive_diverged: bool = False
    perturbed: ClosedLoopMaps | None = None

    @property
    def ratio(self) -> float:
        if self.receding_final == 0.0:
            return np.inf if self.naive_final > 0 else 1.0
        return self.naive_final / self.receding_final


def sensitivity_experiment(
    plant: Plant,
    maps: ClosedLoopMaps,
    delta_scale: float,
    seed: int = 0,
    N: int = 300,
    site: int | None = None,
    backend: str | None = None,
) -> SensitivityReport:
    """Unit impulse at time 0 under identical synthesis errors for both schemes.

    Reports the infinity norm of x[N] for the receding and naive schemes.
    """
    rng = np.random.default_rng(seed)
    site = plant.n // 2 if site is None else site
    if delta_scale > 0:
        deltas = random_deltas(plant.n, maps.T, delta_scale, rng)
        pert = perturb_maps_fir(maps, plant, deltas)
    else:
        pert = maps
    dist = Impulse(site=site, time=0)
    rec = simulate(plant, pert, dist, N + 1, "receding", backend)
    try:
        nav = simulate(plant, pert, dist, N + 1, "naive", backend)
        naive_final = float(np.abs(nav.x_log[N]).max())
        diverged = False
    except SimulationDiverged as exc:
        nav = exc.trace
        naive_final = np.inf
        diverged = True
    return SensitivityReport(
        delta_scale=delta_scale,
        N=N,
        site=site,
        receding_final=float(np.abs(rec.x_log[N]).max()),
        naive_final=naive_final,
        receding_trace=rec,
        naive_trace=nav,
        naive_diverged=diverged,
        perturbed=pert,
    )
