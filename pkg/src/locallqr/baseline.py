"""Centralized infinite-horizon LQR used to normalize localized objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import NoConvergence
from .llqr import CostWeights
from .plant import Plant

RICCATI_TOL = 1e-12
MAX_ITERS = 10**6


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    P: np.ndarray
    K_gain: np.ndarray
    iterations: int
    residual: float

    def closed_loop(self, plant: Plant) -> np.ndarray:
        return plant.A - plant.B @ self.K_gain


def _riccati_map(A, B, Q, Rw, P):
    if B.shape[1] == 0:
        return A.T @ P @ A + Q
    BtPA = B.T @ P @ A
    G = la.solve(Rw + B.T @ P @ B, BtPA, assume_a="pos")
    nxt = A.T @ P @ A - BtPA.T @ G + Q
    return 0.5 * (nxt + nxt.T)


def dare_residual(plant: Plant, weights: CostWeights, P) -> float:
    P = np.asarray(P)
    return float(np.abs(P - _riccati_map(plant.A, plant.B, weights.Q, weights.Rw, P)).max())


def solve_dare(
    plant: Plant,
    weights: CostWeights,
    tol: float = RICCATI_TOL,
    max_iters: int = MAX_ITERS,
) -> RiccatiSolution:
    """Fixed-point iteration of the discrete Riccati map started at P = Q."""
    weights.check(plant)
    A, B, Q, Rw = plant.A, plant.B, weights.Q, weights.Rw
    P = np.array(Q, dtype=float)
    for it in range(1, max_iters + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            P_next = _riccati_map(A, B, Q, Rw, P)
        gap = float(np.abs(P_next - P).max())
        P = P_next
        if not np.isfinite(gap):
            raise NoConvergence(f"Riccati iteration blew up after {it} iterations")
        if gap <= tol:
            break
    else:
        raise NoConvergence(f"no convergence after {max_iters} iterations (last gap {gap:.3e})")

    if plant.m:
        K = la.solve(Rw + B.T @ P @ B, B.T @ P @ A, assume_a="pos")
    else:
        K = np.zeros((0, plant.n))
    rho = float(np.max(np.abs(np.linalg.eigvals(A - B @ K))))
    if rho >= 1.0:
        raise NoConvergence(f"converged gain is not stabilizing (closed-loop radius {rho:.6f})")
    return RiccatiSolution(P=P, K_gain=K, iterations=it, residual=gap)


def centralized_h2_objective(plant: Plant, weights: CostWeights) -> float:
    """Trace(P): summed optimal cost over unit impulses at every state."""
    return float(np.trace(solve_dare(plant, weights).P))
