"""Localized LQR synthesis by per-column equality-constrained QPs."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import Infeasible, SingularKKT
from .feasibility import (
    RANK_RTOL,
    ClosedLoopMaps,
    StackedLocalProblem,
    _trajectories,
    assemble_maps,
    build_stacked,
    feas_tol,
    map_columns,
)
from .plant import Plant, reduce
from .sparsity import ConstraintSpace, validate_dT_constraint


@dataclass(frozen=True, eq=False)
class CostWeights:
    """State weight Q (PSD, n x n) and control weight Rw (PD, m x m)."""

    Q: np.ndarray
    Rw: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.array(self.Q, dtype=float))
        Rw = np.array(self.Rw, dtype=float)
        Rw = Rw.reshape(0, 0) if Rw.size == 0 else np.atleast_2d(Rw)
        for name, W in (("Q", Q), ("Rw", Rw)):
            if W.shape[0] != W.shape[1]:
                raise ValueError(f"{name} must be square, got {W.shape}")
            if W.size and np.abs(W - W.T).max() > 1e-12:
                raise ValueError(f"{name} must be symmetric")
        if Q.size and np.linalg.eigvalsh(Q).min() < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if Rw.size and np.linalg.eigvalsh(Rw).min() <= 1e-10:
            raise ValueError("Rw must be positive definite")
        Q.setflags(write=False)
        Rw.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "Rw", Rw)

    @classmethod
    def identity(cls, n: int, m: int) -> "CostWeights":
        return cls(np.eye(n), np.eye(m))

    def check(self, plant: Plant) -> None:
        if self.Q.shape != (plant.n, plant.n) or self.Rw.shape != (plant.m, plant.m):
            raise ValueError(
                f"weights {self.Q.shape}/{self.Rw.shape} do not match plant n={plant.n}, m={plant.m}"
            )


@dataclass(frozen=True, eq=False)
class KKTSystem:
    """Reduced QP: minimize U'HU + 2U'g subject to Ca U = -Wa."""

    sp: StackedLocalProblem
    H: np.ndarray
    Ca: np.ndarray
    Cb: np.ndarray
    Wa: np.ndarray
    Wb: np.ndarray
    Q_r: np.ndarray
    R_r: np.ndarray
    const: float

    @property
    def g(self) -> np.ndarray:
        return self.Cb.T @ self.Q_r @ self.Wb

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate([-self.g, -self.Wa])

    def objective(self, U_r: np.ndarray) -> float:
        """Column cost including the x[1] = e term."""
        X_r = self.Wb + self.Cb @ U_r
        return float(self.const + X_r @ self.Q_r @ X_r + U_r @ self.R_r @ U_r)


def build_kkt(sp: StackedLocalProblem, weights: CostWeights) -> KKTSystem:
    rp, T = sp.rp, sp.T
    Q_j = weights.Q[np.ix_(rp.state_map, rp.state_map)]
    R_j = weights.Rw[np.ix_(rp.control_map, rp.control_map)]
    Q_bar = np.kron(np.eye(T), Q_j)
    R_bar = np.kron(np.eye(T), R_j)
    xm, um = sp.x_mask, sp.u_mask
    Q_r = Q_bar[np.ix_(xm, xm)]
    R_r = R_bar[np.ix_(um, um)]
    Cr = sp.C[:, um]
    Ca, Cb = Cr[~xm], Cr[xm]
    Wa, Wb = sp.W[~xm], sp.W[xm]
    H = R_r + Cb.T @ Q_r @ Cb
    H = 0.5 * (H + H.T)
    e = sp.e
    const = float(e @ Q_j @ e)
    return KKTSystem(sp=sp, H=H, Ca=Ca, Cb=Cb, Wa=Wa, Wb=Wb, Q_r=Q_r, R_r=R_r, const=const)


@dataclass(frozen=True, eq=False)
class KKTSolution:
    U_r: np.ndarray
    lam: np.ndarray
    kept_rows: np.ndarray
    primal_residual: float
    stationarity_residual: float


def independent_rows(Ca: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Indices of a maximal independent row subset (pivoted QR on Ca^T)."""
    if Ca.size == 0:
        return np.zeros(0, dtype=int)
    _, Rf, piv = la.qr(Ca.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rf))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros(0, dtype=int)
    rank = int(np.sum(diag > rtol * diag[0]))
    return np.sort(piv[:rank])


def solve_kkt(kkt: KKTSystem, tol: float | None = None) -> KKTSolution:
    """Solve the optimality system after removing redundant zero-forcing rows.

    Raises Infeasible when Ca U = -Wa is inconsistent, SingularKKT when the
    reduced KKT matrix cannot be factorized.
    """
    if tol is None:
        tol = feas_tol(kkt.sp.rp.A_loc)
    Ca, Wa, H = kkt.Ca, kkt.Wa, kkt.H
    nu = H.shape[0]

    if Wa.size and nu:
        U_ls = np.linalg.lstsq(Ca, -Wa, rcond=RANK_RTOL)[0]
        resid = float(np.abs(Ca @ U_ls + Wa).max())
    else:
        resid = float(np.abs(Wa).max()) if Wa.size else 0.0
    if resid > tol:
        raise Infeasible(
            f"column {kkt.sp.rp.j}: zero-forcing constraints inconsistent (residual {resid:.3e})",
            columns=[kkt.sp.rp.j],
            residuals=[resid],
        )

    if nu == 0:
        U = np.zeros(0)
        lam = np.zeros(Ca.shape[0])
        return KKTSolution(U, lam, np.zeros(0, dtype=int), resid, 0.0)

    keep = independent_rows(Ca) if Ca.shape[0] else np.zeros(0, dtype=int)
    Ck = Ca[keep]
    p = Ck.shape[0]
    K = np.zeros((nu + p, nu + p))
    K[:nu, :nu] = H
    K[:nu, nu:] = Ck.T
    K[nu:, :nu] = Ck
    rhs = np.concatenate([-kkt.g, -Wa[keep]])
    try:
        sol = la.solve(K, rhs, assume_a="sym")
    except (la.LinAlgError, ValueError) as exc:
        raise SingularKKT(f"column {kkt.sp.rp.j}: {exc}") from exc
    U = sol[:nu]
    lam = np.zeros(Ca.shape[0])
    lam[keep] = sol[nu:]
    primal = float(np.abs(Ca @ U + Wa).max()) if Wa.size else 0.0
    if primal > tol:
        raise Infeasible(
            f"column {kkt.sp.rp.j}: KKT solution violates constraints ({primal:.3e})",
            columns=[kkt.sp.rp.j],
            residuals=[primal],
        )
    stat = H @ U + kkt.g + (Ca.T @ lam if Ca.size else 0.0)
    return KKTSolution(U, lam, keep, primal, float(np.abs(stat).max()))


@dataclass
class ColumnReport:
    column: int
    objective: float
    primal_residual: float
    stationarity_residual: float
    seconds: float


@dataclass
class SynthesisResult:
    maps: ClosedLoopMaps
    objective: float
    columns: list[ColumnReport] = field(repr=False)

    def __iter__(self):
        # allows ``maps, objective = synthesize_llqr(...)``
        return iter((self.maps, self.objective))

    def report(self) -> dict:
        return {
            "objective": self.objective,
            "n": self.maps.n,
            "m": self.maps.m,
            "T": self.maps.T,
            "columns": [
                {
                    "column": c.column + 1,
                    "objective": c.objective,
                    "primal_residual": c.primal_residual,
                    "stationarity_residual": c.stationarity_residual,
                    "seconds": c.seconds,
                }
                for c in self.columns
            ],
        }

    def write_report(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.report(), fh, indent=2)


def synthesize_column(plant: Plant, j: int, d: int, S_x, S_u, T: int, weights: CostWeights, tol: float):
    t0 = time.perf_counter()
    rp = reduce(plant, j, d)
    sp = build_stacked(rp, S_x, S_u, T)
    kkt = build_kkt(sp, weights)
    sol = solve_kkt(kkt, tol)
    x, u = _trajectories(sp, sol.U_r)
    rep = ColumnReport(
        column=j,
        objective=kkt.objective(sol.U_r),
        primal_residual=sol.primal_residual,
        stationarity_residual=sol.stationarity_residual,
        seconds=time.perf_counter() - t0,
    )
    return rp, x, u, rep


def synthesize_llqr(
    plant: Plant,
    S_x: ConstraintSpace,
    S_u: ConstraintSpace,
    T: int,
    weights: CostWeights,
    d: int,
    workers: int | None = None,
) -> SynthesisResult:
    """Optimal localized maps; the objective is the sum of per-column costs."""
    weights.check(plant)
    if not validate_dT_constraint(S_x, S_u, plant.A_pattern, plant.B_pattern, d, T):
        raise ValueError("constraint pair is not a (d, T) localized FIR constraint")
    tol = feas_tol(plant.A)

    def one(j):
        try:
            return synthesize_column(plant, j, d, S_x, S_u, T, weights, tol)
        except Infeasible as exc:
            return exc

    results = map_columns(one, plant.n, workers)
    failed = [r for r in results if isinstance(r, Infeasible)]
    if failed:
        raise Infeasible(
            f"{len(failed)} column(s) infeasible",
            columns=[c for r in failed for c in r.columns],
            residuals=[x for r in failed for x in r.residuals],
        )
    maps = assemble_maps(plant.n, plant.m, T, ((rp, x, u) for rp, x, u, _ in results))
    reports = [r[3] for r in results]
    return SynthesisResult(maps=maps, objective=float(sum(c.objective for c in reports)), columns=reports)


def lqr_objective(maps: ClosedLoopMaps, weights: CostWeights) -> float:
    """Sum over taps of Trace(R'QR + M'RwM)."""
    Q, Rw = weights.Q, weights.Rw
    x = np.einsum("kij,il,klj->", maps.R, Q, maps.R)
    u = np.einsum("kij,il,klj->", maps.M, Rw, maps.M) if maps.m else 0.0
    return float(x + u)


def evaluate_awgn_cost(maps: ClosedLoopMaps, weights: CostWeights) -> float:
    """Stationary per-step expected cost under unit-covariance white noise."""
    Q, Rw = weights.Q, weights.Rw
    R2 = maps.R[1:]
    cost = np.trace(Q) + np.einsum("kij,il,klj->", R2, Q, R2)
    if maps.m:
        cost += np.einsum("kij,il,klj->", maps.M, Rw, maps.M)
    return float(cost)
