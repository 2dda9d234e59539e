import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locallqr.plant import make_chain
from locallqr.sparsity import (
    ConstraintSpace,
    SparsityPattern,
    build_localized_fir_constraints,
    format_pattern,
    graph_distance,
    in_set,
    is_Ad_sparse,
    parse_pattern,
    pattern_power,
    pattern_power_union,
    pattern_product,
    support,
    validate_dT_constraint,
)
from oracles import bfs_distance


def band(n, w):
    i, j = np.indices((n, n))
    return SparsityPattern(np.abs(i - j) <= w)


def chain_pattern(n):
    return make_chain(n).A_pattern


@st.composite
def bool_matrices(draw, max_n=7, square=True):
    n = draw(st.integers(1, max_n))
    m = n if square else draw(st.integers(1, max_n))
    bits = draw(st.lists(st.booleans(), min_size=n * m, max_size=n * m))
    return np.array(bits, dtype=bool).reshape(n, m)


class TestPattern:
    def test_identity_support(self):
        assert support(np.eye(3)).entries == [(0, 0), (1, 1), (2, 2)]

    def test_zero_support(self):
        assert support(np.zeros((2, 2))).nnz == 0

    def test_support_threshold(self):
        assert support(np.array([[1e-13, 2e-12]])).entries == [(0, 1)]

    def test_benchmark_band(self, bench_plant):
        assert bench_plant.A_pattern == band(59, 1)

    def test_from_entries_dedup_and_bounds(self):
        p = SparsityPattern.from_entries(2, 3, [(0, 1), (0, 1), (1, 2)])
        assert p.nnz == 2
        with pytest.raises((ValueError, IndexError)):
            SparsityPattern.from_entries(2, 2, [(2, 0)])

    def test_union_idempotent(self):
        p = band(4, 1)
        assert (p | p) == p

    def test_containment(self):
        assert band(5, 1) <= band(5, 2)
        assert not band(5, 2) <= band(5, 1)

    def test_product_cases(self):
        P = band(5, 1)
        assert pattern_product(SparsityPattern.identity(5), P) == P
        assert pattern_product(band(3, 1), band(3, 1)) == band(3, 2)
        assert pattern_product(SparsityPattern.zeros(5, 5), P).nnz == 0

    def test_roundtrip_text(self):
        p = band(6, 2)
        text = format_pattern(p)
        assert text.splitlines()[0] == f"6 6 {p.nnz}"
        assert parse_pattern(text) == p

    @given(bool_matrices(), st.integers(0, 2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_product_overapproximates(self, mask, seed):
        rng = np.random.default_rng(seed)
        X = mask * rng.uniform(0.5, 1.5, mask.shape)
        Y = mask.T * rng.uniform(0.5, 1.5, mask.T.shape)
        structural = pattern_product(support(X), support(Y))
        assert support(X @ Y) <= structural
        # positive entries cannot cancel, so equality holds
        assert support(X @ Y) == structural


class TestPowers:
    def test_d0_identity(self):
        assert pattern_power_union(band(6, 1), 0) == SparsityPattern.identity(6)

    def test_band_d2(self):
        assert pattern_power_union(band(8, 1), 2) == band(8, 2)

    def test_saturates_at_diameter(self):
        assert pattern_power_union(band(5, 1), 4) == SparsityPattern.ones(5, 5)

    def test_literal_power_without_self_loops(self):
        P = SparsityPattern(np.eye(4, k=1, dtype=bool))
        assert pattern_power(P, 2) == SparsityPattern(np.eye(4, k=2, dtype=bool))
        assert pattern_power_union(P, 2) == SparsityPattern(np.triu(np.tril(np.ones((4, 4), bool), 2)))

    @given(bool_matrices(), st.integers(0, 6))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_d(self, mask, d):
        S = SparsityPattern(mask)
        assert pattern_power_union(S, d) <= pattern_power_union(S, d + 1)

    def test_distance_cases(self):
        P = band(3, 1)
        assert graph_distance(P, 1, 1) == 0
        assert graph_distance(P, 2, 0) == 2
        blocks = SparsityPattern(np.kron(np.eye(2, dtype=bool), np.ones((2, 2), dtype=bool)))
        assert graph_distance(blocks, 3, 0) is None

    @given(bool_matrices())
    @settings(max_examples=60, deadline=None)
    def test_distance_matches_bfs(self, mask):
        S = SparsityPattern(mask)
        n = mask.shape[0]
        for j in range(n):
            for k in range(n):
                assert graph_distance(S, k, j) == bfs_distance(mask.astype(float), k, j)

    @given(bool_matrices(), st.integers(0, 5))
    @settings(max_examples=60, deadline=None)
    def test_in_set_matches_distance(self, mask, d):
        S = SparsityPattern(mask)
        n = mask.shape[0]
        for j in range(n):
            out = set(in_set(S, j, d, "F").tolist())
            inc = set(in_set(S, j, d, "E").tolist())
            for s in range(n):
                fwd = graph_distance(S, j, s)
                bwd = graph_distance(S, s, j)
                assert (s in out) == (fwd is not None and fwd <= d)
                assert (s in inc) == (bwd is not None and bwd <= d)

    def test_in_set_examples(self):
        assert list(in_set(band(5, 1), 2, 0, "F")) == [2]
        assert list(in_set(band(5, 1), 2, 1, "E")) == [1, 2, 3]
        assert list(in_set(chain_pattern(59), 29, 9, "F")) == list(range(20, 39))


class TestAdSparse:
    def test_empty(self):
        assert is_Ad_sparse(SparsityPattern.zeros(4, 4), band(4, 1), 0)

    def test_band_too_wide(self):
        assert not is_Ad_sparse(band(6, 2), band(6, 1), 1)

    def test_benchmark_sx(self, bench_constraints, bench_plant):
        S_x, _ = bench_constraints
        assert all(is_Ad_sparse(tap, bench_plant.A_pattern, 9) for tap in S_x)


class TestConstraints:
    def test_benchmark_taps(self, bench_plant, bench_constraints):
        S_x, S_u = bench_constraints
        A = bench_plant.A_pattern
        assert S_x.T == 29 and S_u.T == 29
        for k in range(1, 30):
            assert S_x.tap(k) == pattern_power_union(A, min(9, math.floor(1.5 * (k - 1))))
        assert S_x.tap(1) == SparsityPattern.identity(59)
        assert S_u.tap(1).nnz == 0
        assert S_x.tap(30).nnz == 0

    def test_no_delay_saturates(self):
        A = chain_pattern(7)
        S_x, S_u = build_localized_fir_constraints(A, SparsityPattern.identity(7), 2, 5, math.inf)
        assert S_x.tap(1) == SparsityPattern.identity(7)
        for k in range(2, 6):
            assert S_x.tap(k) == pattern_power_union(A, 2)
            assert S_u.tap(k) == pattern_power_union(A, 3)

    def test_T2_d0(self):
        A = chain_pattern(5)
        B = SparsityPattern.identity(5)
        S_x, S_u = build_localized_fir_constraints(A, B, 0, 2, 1.0)
        assert S_x.tap(1) == S_x.tap(2) == SparsityPattern.identity(5)
        assert S_u.tap(2) == pattern_product(B.T, pattern_power_union(A, 0))

    def test_validate_rejects_dense_su(self):
        A = chain_pattern(8)
        B = SparsityPattern.identity(8)
        S_x, S_u = build_localized_fir_constraints(A, B, 1, 3, 1.0)
        bad = ConstraintSpace(tuple(SparsityPattern.ones(8, 8) for _ in range(3)))
        assert validate_dT_constraint(S_x, S_u, A, B, 1, 3)
        assert not validate_dT_constraint(S_x, bad, A, B, 1, 3)

    def test_scalar_subsystems_condition(self):
        A = chain_pattern(6)
        B = SparsityPattern.identity(6)
        S_x, _ = build_localized_fir_constraints(A, B, 1, 3, math.inf)
        inside = ConstraintSpace((pattern_power_union(A, 2),) * 3)
        outside = ConstraintSpace((pattern_power_union(A, 3),) * 3)
        assert validate_dT_constraint(S_x, inside, A, B, 1, 3)
        assert not validate_dT_constraint(S_x, outside, A, B, 1, 3)

    @given(
        st.integers(2, 9),
        st.integers(0, 4),
        st.integers(1, 8),
        st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]),
    )
    @settings(max_examples=60, deadline=None)
    def test_construction_properties(self, n, d, T, h):
        A = chain_pattern(n)
        B = SparsityPattern(np.eye(n, max(1, n // 2), dtype=bool) | np.eye(n, max(1, n // 2), k=-1, dtype=bool))
        S_x, S_u = build_localized_fir_constraints(A, B, d, T, h)
        assert validate_dT_constraint(S_x, S_u, A, B, d, T)
        for k in range(1, T):
            assert pattern_power(A, min(k, d)) <= S_x.tap(k + 1)

    def test_slow_communication_rejected(self):
        with pytest.raises(ValueError):
            build_localized_fir_constraints(chain_pattern(5), SparsityPattern.identity(5), 2, 4, 0.5)

    def test_constraint_space_shape_checks(self):
        with pytest.raises(ValueError):
            ConstraintSpace((SparsityPattern.zeros(2, 2), SparsityPattern.zeros(3, 3)))
        with pytest.raises(ValueError):
            ConstraintSpace(())
