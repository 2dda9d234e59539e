"""Localizability: stacked per-column tests and closed-loop map assembly.

Internally every stacked vector runs forward in time: block r of X holds
x[r + 1] (r = 1..T) and block s of U holds u[s] (s = 1..T).  Block T of X
is x[T + 1], which the FIR constraint forces to zero.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible
from .plant import Plant, ReducedPlant, embed_control, embed_state, reduce
from .sparsity import (
    ConstraintSpace,
    build_localized_fir_constraints,
    stack_taps,
    support,
    validate_dT_constraint,
)

RANK_RTOL = 1e-10


def feas_tol(A) -> float:
    """Residual tolerance scaled by the infinity norm of A."""
    return 1e-8 * (1.0 + float(np.linalg.norm(np.asarray(A), np.inf)))


@dataclass(frozen=True, eq=False)
class ClosedLoopMaps:
    """FIR closed-loop maps; ``R[k - 1]`` is R[k] (n x n), ``M[k - 1]`` is M[k] (m x n)."""

    R: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        R = np.array(self.R, dtype=float, copy=True)
        M = np.array(self.M, dtype=float, copy=True)
        if R.ndim != 3 or R.shape[1] != R.shape[2]:
            raise ValueError(f"R must have shape (T, n, n), got {R.shape}")
        if M.ndim != 3 or M.shape[0] != R.shape[0] or M.shape[2] != R.shape[1]:
            raise ValueError(f"M must have shape (T, m, n), got {M.shape}")
        R.setflags(write=False)
        M.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "M", M)

    @property
    def T(self) -> int:
        return self.R.shape[0]

    @property
    def n(self) -> int:
        return self.R.shape[1]

    @property
    def m(self) -> int:
        return self.M.shape[1]

    def recursion_residuals(self, plant: Plant) -> np.ndarray:
        """Infinity norms of R[k+1] - A R[k] - B M[k], k = 1..T, with R[T+1] = 0."""
        A, B = plant.A, plant.B
        nxt = np.concatenate([self.R[1:], np.zeros((1, self.n, self.n))])
        res = nxt - A @ self.R - B @ self.M
        return np.abs(res).max(axis=(1, 2))

    def max_residual(self, plant: Plant) -> float:
        return float(self.recursion_residuals(plant).max())

    def within(self, S_x: ConstraintSpace, S_u: ConstraintSpace, zero_tol: float = 0.0) -> bool:
        """Supports of every tap sit inside the constraint taps."""
        return all(
            support(self.R[k - 1], zero_tol) <= S_x.tap(k)
            and support(self.M[k - 1], zero_tol) <= S_u.tap(k)
            for k in range(1, self.T + 1)
        )

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Impulse response to a disturbance at state j: (T x n, T x m)."""
        return self.R[:, :, j], self.M[:, :, j]


def format_maps(maps: ClosedLoopMaps) -> str:
    lines = [f"{maps.n} {maps.m} {maps.T}"]
    for block in (maps.R, maps.M):
        for tap in block:
            lines.extend(" ".join(format(float(v), ".17g") for v in row) for row in tap)
    return "\n".join(lines) + "\n"


def parse_maps(text: str) -> ClosedLoopMaps:
    tokens = text.split()
    if len(tokens) < 3:
        raise ValueError("maps file needs an 'n m T' header")
    n, m, T = (int(t) for t in tokens[:3])
    vals = np.array([float(t) for t in tokens[3:]])
    if vals.size != T * n * n + T * m * n:
        raise ValueError(f"expected {T * n * n + T * m * n} values, found {vals.size}")
    R = vals[: T * n * n].reshape(T, n, n)
    M = vals[T * n * n :].reshape(T, m, n)
    return ClosedLoopMaps(R, M)


def save_maps(maps: ClosedLoopMaps, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_maps(maps))


def load_maps(path) -> ClosedLoopMaps:
    with open(path) as fh:
        return parse_maps(fh.read())


@dataclass(frozen=True, eq=False)
class StackedLocalProblem:
    """X = W + C U for one disturbance column, with stacked masks."""

    rp: ReducedPlant
    T: int
    W: np.ndarray
    C: np.ndarray
    x_mask: np.ndarray
    u_mask: np.ndarray

    @property
    def e(self) -> np.ndarray:
        e = np.zeros(self.rp.n_loc)
        e[self.rp.w_slot] = 1.0
        return e


def build_stacked(rp: ReducedPlant, S_x: ConstraintSpace, S_u: ConstraintSpace, T: int) -> StackedLocalProblem:
    nl, ml = rp.n_loc, rp.m_loc
    A, B = rp.A_loc, rp.B_loc
    powers = [np.eye(nl)]
    for _ in range(T):
        powers.append(powers[-1] @ A)
    e = np.zeros(nl)
    e[rp.w_slot] = 1.0

    W = np.concatenate([powers[r] @ e for r in range(1, T + 1)])
    AB = [P @ B for P in powers[:T]]
    C = np.zeros((nl * T, ml * T))
    for r in range(1, T + 1):
        for s in range(1, r + 1):
            C[(r - 1) * nl : r * nl, (s - 1) * ml : s * ml] = AB[r - s]

    # x-block r is x[r+1]; tap T+1 is zero beyond the horizon
    x_mask = np.concatenate([S_x.tap(k).mask[list(rp.state_map), rp.j] for k in range(2, T + 2)])
    u_mask = stack_taps(S_u, rp.control_map, rp.j, T) if ml else np.zeros(0, dtype=bool)
    for arr in (W, C, x_mask, u_mask):
        arr.setflags(write=False)
    return StackedLocalProblem(rp=rp, T=T, W=W, C=C, x_mask=x_mask, u_mask=u_mask)


@dataclass(frozen=True, eq=False)
class LocalSolution:
    """Reduced trajectories: x has T+1 rows (x[1]..x[T+1]), u has T rows."""

    x: np.ndarray
    u: np.ndarray
    residual: float


def _trajectories(sp: StackedLocalProblem, U_r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nl, ml, T = sp.rp.n_loc, sp.rp.m_loc, sp.T
    U = np.zeros(ml * T)
    U[sp.u_mask] = U_r
    X = sp.W + sp.C @ U
    X[~sp.x_mask] = 0.0
    x = np.vstack([sp.e, X.reshape(T, nl)])
    return x, U.reshape(T, ml)


def solve_local_feasibility(sp: StackedLocalProblem, tol: float | None = None) -> LocalSolution:
    """Minimum-norm feasible point of the j-th local test.

    Raises Infeasible carrying the attained minimal residual.
    """
    if tol is None:
        tol = feas_tol(sp.rp.A_loc)
    Cr = sp.C[:, sp.u_mask]
    Ca = Cr[~sp.x_mask]
    Wa = sp.W[~sp.x_mask]
    if Ca.shape[1] == 0 or Ca.shape[0] == 0:
        U_r = np.zeros(Cr.shape[1])
    else:
        U_r = np.linalg.lstsq(Ca, -Wa, rcond=RANK_RTOL)[0]
    resid = float(np.abs(Wa + Ca @ U_r).max()) if Wa.size else 0.0
    if resid > tol:
        raise Infeasible(
            f"column {sp.rp.j} is not localizable (residual {resid:.3e})",
            columns=[sp.rp.j],
            residuals=[resid],
        )
    x, u = _trajectories(sp, U_r)
    return LocalSolution(x=x, u=u, residual=resid)


def assemble_maps(n: int, m: int, T: int, columns) -> ClosedLoopMaps:
    """Embed per-column reduced trajectories into global maps.

    ``columns`` yields (ReducedPlant, x (T+1 x n_loc), u (T x m_loc)).
    """
    R = np.zeros((T, n, n))
    M = np.zeros((T, m, n))
    for rp, x, u in columns:
        R[:, :, rp.j] = embed_state(rp, x[:T].T, n).T
        M[:, :, rp.j] = embed_control(rp, u.T, m).T
    R[0] = np.eye(n)
    return ClosedLoopMaps(R, M)


def map_columns(fn, n: int, workers: int | None):
    """Apply fn to every column index, optionally on a thread pool; ordered by j."""
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(n)))
    return [fn(j) for j in range(n)]


def solve_global(
    plant: Plant,
    S_x: ConstraintSpace,
    S_u: ConstraintSpace,
    T: int,
    d: int,
    workers: int | None = None,
) -> ClosedLoopMaps:
    """Solve all local tests and assemble (R, M).

    Raises Infeasible listing every failing column.
    """
    if not validate_dT_constraint(S_x, S_u, plant.A_pattern, plant.B_pattern, d, T):
        raise ValueError("constraint pair is not a (d, T) localized FIR constraint")
    tol = feas_tol(plant.A)

    def one(j):
        rp = reduce(plant, j, d)
        sp = build_stacked(rp, S_x, S_u, T)
        try:
            return rp, solve_local_feasibility(sp, tol)
        except Infeasible as exc:
            return rp, exc

    results = map_columns(one, plant.n, workers)
    failed = [(rp.j, r.residuals[0]) for rp, r in results if isinstance(r, Infeasible)]
    if failed:
        raise Infeasible(
            f"{len(failed)} column(s) not localizable",
            columns=[j for j, _ in failed],
            residuals=[r for _, r in failed],
        )
    return assemble_maps(plant.n, plant.m, T, ((rp, s.x, s.u) for rp, s in results))


@dataclass
class LocalizabilityReport:
    d: int
    T: int
    h: float
    feasible: list[bool]
    residuals: list[float]
    tol: float
    maps: ClosedLoopMaps | None = field(default=None, repr=False)

    @property
    def localizable(self) -> bool:
        return all(self.feasible)

    @property
    def failing_columns(self) -> list[int]:
        return [j for j, ok in enumerate(self.feasible) if not ok]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "T": self.T,
            "h": None if np.isinf(self.h) else self.h,
            "localizable": self.localizable,
            "tol": self.tol,
            "columns": [
                {"column": j + 1, "feasible": ok, "residual": r}
                for j, (ok, r) in enumerate(zip(self.feasible, self.residuals))
            ],
        }


def check_localizable(plant: Plant, d: int, T: int, h: float, workers: int | None = None) -> LocalizabilityReport:
    """Per-column verdicts under the delay-aware (d, T) constraints; never raises Infeasible."""
    S_x, S_u = build_localized_fir_constraints(plant.A_pattern, plant.B_pattern, d, T, h)
    tol = feas_tol(plant.A)

    def one(j):
        rp = reduce(plant, j, d)
        sp = build_stacked(rp, S_x, S_u, T)
        try:
            sol = solve_local_feasibility(sp, tol)
            return rp, sol, True, sol.residual
        except Infeasible as exc:
            return rp, None, False, exc.residuals[0]

    results = map_columns(one, plant.n, workers)
    feasible = [ok for _, _, ok, _ in results]
    residuals = [r for _, _, _, r in results]
    maps = None
    if all(feasible):
        maps = assemble_maps(plant.n, plant.m, T, ((rp, s.x, s.u) for rp, s, _, _ in results))
    return LocalizabilityReport(d=d, T=T, h=h, feasible=feasible, residuals=residuals, tol=tol, maps=maps)
