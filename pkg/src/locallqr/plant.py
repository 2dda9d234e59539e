"""Plant models, benchmark generators and per-column reduced plants."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sparsity import OUTGOING, SparsityPattern, in_set, support


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Plant:
    """Discrete-time plant x[k+1] = A x[k] + B u[k] + w[k]."""

    A: np.ndarray
    B: np.ndarray
    A_pattern: SparsityPattern = field(init=False, repr=False)
    B_pattern: SparsityPattern = field(init=False, repr=False)

    def __post_init__(self):
        A = _frozen(np.atleast_2d(self.A))
        n = A.shape[0]
        if A.shape != (n, n) or n < 1:
            raise ValueError(f"A must be square and nonempty, got {A.shape}")
        B = np.asarray(self.B, dtype=float)
        if B.size == 0:
            B = np.zeros((n, 0))
        B = _frozen(B.reshape(n, -1) if B.ndim == 1 else B)
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "A_pattern", support(A))
        object.__setattr__(self, "B_pattern", support(B) if B.shape[1] else SparsityPattern.zeros(n, 0))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


@dataclass(frozen=True, eq=False)
class ReducedPlant:
    """Plant restricted to F(j, d+1) and the controls acting only there."""

    j: int
    d: int
    state_map: tuple[int, ...]
    control_map: tuple[int, ...]
    A_loc: np.ndarray
    B_loc: np.ndarray
    w_slot: int

    @property
    def n_loc(self) -> int:
        return len(self.state_map)

    @property
    def m_loc(self) -> int:
        return len(self.control_map)


def make_chain(n: int, diag: float = 1.0, upper: float = 0.2, lower: float = -0.2, B=None) -> Plant:
    """Tridiagonal chain; B defaults to the identity (one actuator per state)."""
    A = diag * np.eye(n) + upper * np.eye(n, k=1) + lower * np.eye(n, k=-1)
    return Plant(A, np.eye(n) if B is None else B)


def make_chain_benchmark() -> Plant:
    """59-state unstable chain with 20 actuators on state pairs (1,2), (7,8), ..., (55,56)."""
    n, m = 59, 20
    B = np.zeros((n, m))
    for q in range(10):
        B[6 * q, 2 * q] = 1.0
        B[6 * q + 1, 2 * q + 1] = 1.0
    return make_chain(n, B=B)


def random_plant(n: int, topology: str, rng: np.random.Generator, m: int | None = None) -> Plant:
    """Random plant on a chain, ring or random tree.

    Each actuator drives one or two adjacent states.
    """
    edges = []
    if topology == "chain":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif topology == "ring":
        edges = [(i, (i + 1) % n) for i in range(n)] if n > 2 else [(0, 1)] * (n - 1)
    elif topology == "tree":
        edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    else:
        raise ValueError(f"unknown topology {topology!r}")
    A = np.diag(rng.uniform(0.5, 1.5, n) * rng.choice([-1.0, 1.0], n))
    for a, b in edges:
        if a == b:
            continue
        A[a, b] = rng.uniform(0.2, 1.0) * rng.choice([-1.0, 1.0])
        A[b, a] = rng.uniform(0.2, 1.0) * rng.choice([-1.0, 1.0])
    if m is None:
        m = int(rng.integers(1, n + 1))
    B = np.zeros((n, m))
    for i in range(m):
        s = int(rng.integers(0, n))
        B[s, i] = rng.uniform(0.5, 1.5)
        nbrs = [b for a, b in edges if a == s] + [a for a, b in edges if b == s]
        if nbrs and rng.random() < 0.3:
            B[int(rng.choice(nbrs)), i] = rng.uniform(0.5, 1.5)
    return Plant(A, B)


def reduce(plant: Plant, j: int, d: int) -> ReducedPlant:
    if not 0 <= j < plant.n:
        raise IndexError(f"state index {j} out of range for n={plant.n}")
    states = in_set(plant.A_pattern, j, d + 1, OUTGOING)
    inside = np.zeros(plant.n, dtype=bool)
    inside[states] = True
    controls = [i for i in range(plant.m) if inside[plant.B_pattern.col(i)].all()]
    A_loc = _frozen(plant.A[np.ix_(states, states)])
    B_loc = _frozen(plant.B[np.ix_(states, controls)] if controls else np.zeros((len(states), 0)))
    state_map = tuple(int(s) for s in states)
    return ReducedPlant(
        j=j,
        d=d,
        state_map=state_map,
        control_map=tuple(controls),
        A_loc=A_loc,
        B_loc=B_loc,
        w_slot=state_map.index(j),
    )


def embed_state(rp: ReducedPlant, v, n: int) -> np.ndarray:
    """Scatter a reduced state vector into an n-vector (zero padding)."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != rp.n_loc:
        raise ValueError(f"expected length {rp.n_loc}, got {v.shape[0]}")
    out = np.zeros((n,) + v.shape[1:])
    out[list(rp.state_map)] = v
    return out


def embed_control(rp: ReducedPlant, v, m: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != rp.m_loc:
        raise ValueError(f"expected length {rp.m_loc}, got {v.shape[0]}")
    out = np.zeros((m,) + v.shape[1:])
    if rp.m_loc:
        out[list(rp.control_map)] = v
    return out


def restrict_state(rp: ReducedPlant, x) -> np.ndarray:
    return np.asarray(x, dtype=float)[list(rp.state_map)]


def restrict_control(rp: ReducedPlant, u) -> np.ndarray:
    return np.asarray(u, dtype=float)[list(rp.control_map)]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_plant(plant: Plant) -> str:
    lines = [f"{plant.n} {plant.m}"]
    lines += [" ".join(_fmt(v) for v in row) for row in plant.A]
    lines += [" ".join(_fmt(v) for v in row) for row in plant.B]
    return "\n".join(lines) + "\n"


def parse_plant(text: str) -> Plant:
    """Parse ``n m`` followed by A (n rows of n) then B (n rows of m)."""
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("plant file needs an 'n m' header")
    n, m = int(tokens[0]), int(tokens[1])
    vals = [float(t) for t in tokens[2:]]
    if len(vals) != n * n + n * m:
        raise ValueError(f"expected {n * n + n * m} values for n={n}, m={m}, found {len(vals)}")
    A = np.array(vals[: n * n]).reshape(n, n)
    B = np.array(vals[n * n :]).reshape(n, m)
    return Plant(A, B)


def save_plant(plant: Plant, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_plant(plant))


def load_plant(path) -> Plant:
    with open(path) as fh:
        return parse_plant(fh.read())
