"""Boolean-matrix algebra on interconnection patterns.

Patterns are immutable binary matrices.  All indices in the Python API are
0-based; the text serialization is 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

ZERO_TOL = 1e-12

INCOMING = "E"
OUTGOING = "F"


class SparsityPattern:
    """Immutable binary matrix (support of a matrix or of a spectral tap)."""

    __slots__ = ("_mask", "_hash")

    def __init__(self, mask):
        arr = np.array(mask, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"pattern must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        self._mask = arr
        self._hash = None

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries: Iterable[tuple[int, int]]):
        mask = np.zeros((rows, cols), dtype=bool)
        for i, j in entries:
            if not (0 <= i < rows and 0 <= j < cols):
                raise ValueError(f"entry ({i}, {j}) outside {rows}x{cols}")
            mask[i, j] = True
        return cls(mask)

    @classmethod
    def zeros(cls, rows: int, cols: int):
        return cls(np.zeros((rows, cols), dtype=bool))

    @classmethod
    def ones(cls, rows: int, cols: int):
        return cls(np.ones((rows, cols), dtype=bool))

    @classmethod
    def identity(cls, n: int):
        return cls(np.eye(n, dtype=bool))

    @property
    def mask(self) -> np.ndarray:
        """Read-only boolean array view."""
        return self._mask

    @property
    def shape(self) -> tuple[int, int]:
        return self._mask.shape

    @property
    def rows(self) -> int:
        return self._mask.shape[0]

    @property
    def cols(self) -> int:
        return self._mask.shape[1]

    @property
    def nnz(self) -> int:
        return int(self._mask.sum())

    @property
    def entries(self) -> list[tuple[int, int]]:
        """Sorted list of (row, col) pairs marked 1."""
        r, c = np.nonzero(self._mask)
        return list(zip(r.tolist(), c.tolist()))

    def __eq__(self, other):
        if not isinstance(other, SparsityPattern):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._mask, other._mask))

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.shape, self._mask.tobytes()))
        return self._hash

    def __repr__(self):
        return f"SparsityPattern({self.rows}x{self.cols}, nnz={self.nnz})"

    def _check_same_shape(self, other: "SparsityPattern"):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch: {self.shape} vs {other.shape}")

    def __or__(self, other: "SparsityPattern") -> "SparsityPattern":
        self._check_same_shape(other)
        return SparsityPattern(self._mask | other._mask)

    def __and__(self, other: "SparsityPattern") -> "SparsityPattern":
        self._check_same_shape(other)
        return SparsityPattern(self._mask & other._mask)

    def __le__(self, other: "SparsityPattern") -> bool:
        """Containment: every entry of ``self`` is an entry of ``other``."""
        self._check_same_shape(other)
        return not bool(np.any(self._mask & ~other._mask))

    def __ge__(self, other: "SparsityPattern") -> bool:
        return other <= self

    def __matmul__(self, other: "SparsityPattern") -> "SparsityPattern":
        return pattern_product(self, other)

    @property
    def T(self) -> "SparsityPattern":
        return SparsityPattern(self._mask.T)

    def row(self, i: int) -> np.ndarray:
        return np.flatnonzero(self._mask[i])

    def col(self, j: int) -> np.ndarray:
        return np.flatnonzero(self._mask[:, j])


@dataclass(frozen=True)
class ConstraintSpace:
    """Finite sequence of taps; ``taps[k - 1]`` holds S[k], zero beyond T."""

    taps: tuple[SparsityPattern, ...]

    def __post_init__(self):
        taps = tuple(self.taps)
        if not taps:
            raise ValueError("a constraint space needs at least one tap")
        shape = taps[0].shape
        for t in taps:
            if t.shape != shape:
                raise ValueError("all taps must share one shape")
        object.__setattr__(self, "taps", taps)

    @property
    def T(self) -> int:
        return len(self.taps)

    @property
    def shape(self) -> tuple[int, int]:
        return self.taps[0].shape

    def tap(self, k: int) -> SparsityPattern:
        """S[k] for k >= 1; the all-zeros pattern for k > T."""
        if k < 1:
            raise IndexError("taps are indexed from k = 1")
        if k > self.T:
            return SparsityPattern.zeros(*self.shape)
        return self.taps[k - 1]

    def __iter__(self):
        return iter(self.taps)

    def __len__(self):
        return len(self.taps)


def support(matrix, zero_tol: float = ZERO_TOL) -> SparsityPattern:
    """Pattern of entries with magnitude above ``zero_tol``."""
    arr = np.atleast_2d(np.asarray(matrix, dtype=float))
    return SparsityPattern(np.abs(arr) > zero_tol)


def pattern_product(S2: SparsityPattern, S3: SparsityPattern) -> SparsityPattern:
    if S2.cols != S3.rows:
        raise ValueError(f"cannot multiply {S2.shape} by {S3.shape}")
    prod = S2.mask.astype(np.int64) @ S3.mask.astype(np.int64)
    return SparsityPattern(prod > 0)


@lru_cache(maxsize=256)
def _power_unions(S0: SparsityPattern, d: int) -> tuple[SparsityPattern, ...]:
    n = S0.rows
    out = [SparsityPattern.identity(n)]
    acc = np.eye(n, dtype=bool)
    power = np.eye(n, dtype=np.int64)
    A = S0.mask.astype(np.int64)
    for _ in range(d):
        power = ((power @ A) > 0).astype(np.int64)
        acc = acc | power.astype(bool)
        out.append(SparsityPattern(acc))
    return tuple(out)


def pattern_power(S0: SparsityPattern, p: int) -> SparsityPattern:
    """S0^p with S0^0 = I."""
    if S0.rows != S0.cols:
        raise ValueError("pattern must be square")
    if p < 0:
        raise ValueError("power must be nonnegative")
    result = SparsityPattern.identity(S0.rows)
    for _ in range(p):
        result = pattern_product(result, S0)
    return result


def pattern_power_union(S0: SparsityPattern, d: int) -> SparsityPattern:
    """Union of S0^0 .. S0^d."""
    if S0.rows != S0.cols:
        raise ValueError("pattern must be square")
    if d < 0:
        raise ValueError("d must be nonnegative")
    return _power_unions(S0, int(d))[int(d)]


def graph_distance(S0: SparsityPattern, k: int, j: int) -> Optional[int]:
    """Smallest i with (S0^i)[j, k] set, i.e. hops from node k to node j.

    Returns ``None`` when j is unreachable from k within n hops.
    """
    if S0.rows != S0.cols:
        raise ValueError("pattern must be square")
    n = S0.rows
    reach = np.zeros(n, dtype=bool)
    reach[k] = True
    A = S0.mask
    for i in range(n + 1):
        if reach[j]:
            return i
        # column k of S0^(i+1) = S0 @ (column k of S0^i)
        reach = A[:, reach].any(axis=1)
        if not reach.any():
            return None
    return None


def in_set(pattern: SparsityPattern, j: int, d: int, direction: str) -> np.ndarray:
    """Localized region of node j.

    ``INCOMING`` ("E") gives {s : dist(s -> j) <= d}; ``OUTGOING`` ("F")
    gives {s : dist(j -> s) <= d}.  Sorted ascending.
    """
    U = pattern_power_union(pattern, d)
    if direction == INCOMING:
        return U.row(j)
    if direction == OUTGOING:
        return U.col(j)
    raise ValueError(f"direction must be {INCOMING!r} or {OUTGOING!r}")


def is_Ad_sparse(X, A_pattern: SparsityPattern, d: int) -> bool:
    """True iff X (a pattern or every tap of a space) lies inside the d-hop union."""
    U = pattern_power_union(A_pattern, d)
    taps = X.taps if isinstance(X, ConstraintSpace) else (X,)
    return all(t <= U for t in taps)


def _hops(h: float, steps: int) -> int:
    """floor(h * steps) with floor(inf * 0) taken as 0."""
    if steps < 0:
        return -1
    if steps == 0:
        return 0
    if math.isinf(h):
        return math.inf
    return math.floor(h * steps)


def _footprints(B_pattern: SparsityPattern) -> list[np.ndarray]:
    return [B_pattern.col(i) for i in range(B_pattern.cols)]


def build_localized_fir_constraints(
    A_pattern: SparsityPattern,
    B_pattern: SparsityPattern,
    d: int,
    T: int,
    h: float,
) -> tuple[ConstraintSpace, ConstraintSpace]:
    """Delay-aware (d, T) localized FIR constraint pair.

    S_x[k] = union_{i <= min(d, floor(h(k-1)))} Sp(A)^i for k = 1..T
    S_u[k] = Sp(B^T) union_{i <= min(d+1, floor(h(k-2)))} Sp(A)^i for k = 2..T,
    S_u[1] = 0.

    Entries of S_u whose actuator footprint leaves F(j, d+1) are cleared, so
    the result always satisfies the third localized-FIR condition.  With
    ``h = inf`` there is no communication delay: S_u[1] also gets the d+1
    hop pattern.

    Raises ValueError when the reference-trajectory delay condition
    Sp(A)^min(k, d) <= S_x[k+1] fails (only possible for h < 1).
    """
    if d < 0:
        raise ValueError("d must be nonnegative")
    if T < 1:
        raise ValueError("T must be positive")
    if not h > 0:
        raise ValueError("h must be positive")
    n = A_pattern.rows
    m = B_pattern.cols
    if A_pattern.shape != (n, n) or B_pattern.rows != n:
        raise ValueError("A pattern must be n x n and B pattern n x m")

    S_x = []
    for k in range(1, T + 1):
        S_x.append(pattern_power_union(A_pattern, min(d, _hops(h, k - 1))))

    # footprint of actuator i must sit inside F(j, d+1)
    F_outer = pattern_power_union(A_pattern, d + 1).mask
    allowed = np.ones((m, n), dtype=bool)
    for i, rows in enumerate(_footprints(B_pattern)):
        if rows.size:
            allowed[i] = F_outer[rows, :].all(axis=0)

    Bt = B_pattern.T
    S_u = []
    for k in range(1, T + 1):
        p = d + 1 if math.isinf(h) else min(d + 1, _hops(h, k - 2))
        if p < 0:
            S_u.append(SparsityPattern.zeros(m, n))
            continue
        tap = pattern_product(Bt, pattern_power_union(A_pattern, p))
        S_u.append(SparsityPattern(tap.mask & allowed))

    for k in range(1, T):
        need = pattern_power(A_pattern, min(k, d))
        if not need <= S_x[k]:
            raise ValueError(
                f"communication too slow (h={h}): reference trajectory at tap {k + 1} "
                "cannot be generated before it is needed"
            )

    S_x_space = ConstraintSpace(tuple(S_x))
    S_u_space = ConstraintSpace(tuple(S_u))
    if not validate_dT_constraint(S_x_space, S_u_space, A_pattern, B_pattern, d, T):
        raise ValueError("constructed constraint pair is not (d, T) localized")
    return S_x_space, S_u_space


def validate_dT_constraint(
    S_x: ConstraintSpace,
    S_u: ConstraintSpace,
    A_pattern: SparsityPattern,
    B_pattern: SparsityPattern,
    d: int,
    T: int,
) -> bool:
    n = A_pattern.rows
    m = B_pattern.cols
    if S_x.shape != (n, n):
        raise ValueError(f"S_x taps must be {n}x{n}, got {S_x.shape}")
    if S_u.shape != (m, n):
        raise ValueError(f"S_u taps must be {m}x{n}, got {S_u.shape}")
    if S_x.T > T or S_u.T > T:
        return False
    if not is_Ad_sparse(S_x, A_pattern, d):
        return False
    U = pattern_power_union(A_pattern, d + 1)
    return all(pattern_product(B_pattern, tap) <= U for tap in S_u)


def format_pattern(pattern: SparsityPattern) -> str:
    lines = [f"{pattern.rows} {pattern.cols} {pattern.nnz}"]
    lines.extend(f"{i + 1} {j + 1}" for i, j in pattern.entries)
    return "\n".join(lines) + "\n"


def parse_pattern(text: str) -> SparsityPattern:
    tokens = text.split()
    if len(tokens) < 3:
        raise ValueError("pattern text needs a 'rows cols nnz' header")
    rows, cols, nnz = (int(t) for t in tokens[:3])
    body = tokens[3:]
    if len(body) != 2 * nnz:
        raise ValueError(f"expected {nnz} index pairs, found {len(body) / 2:g}")
    pairs = [(int(body[2 * p]) - 1, int(body[2 * p + 1]) - 1) for p in range(nnz)]
    return SparsityPattern.from_entries(rows, cols, pairs)


def save_pattern(pattern: SparsityPattern, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_pattern(pattern))


def load_pattern(path) -> SparsityPattern:
    with open(path) as fh:
        return parse_pattern(fh.read())


def stack_taps(space: ConstraintSpace, rows: Sequence[int], col: int, T: int) -> np.ndarray:
    """Column ``col`` of taps 1..T restricted to ``rows``, concatenated."""
    rows = np.asarray(rows, dtype=int)
    return np.concatenate([space.tap(k).mask[rows, col] for k in range(1, T + 1)])
