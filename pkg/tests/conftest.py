import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from locallqr import (  # noqa: E402
    CostWeights,
    build_localized_fir_constraints,
    make_chain_benchmark,
    synthesize_llqr,
)

BENCH_D, BENCH_T, BENCH_H = 9, 29, 1.5


@pytest.fixture(scope="session")
def bench_plant():
    return make_chain_benchmark()


@pytest.fixture(scope="session")
def bench_constraints(bench_plant):
    return build_localized_fir_constraints(
        bench_plant.A_pattern, bench_plant.B_pattern, BENCH_D, BENCH_T, BENCH_H
    )


@pytest.fixture(scope="session")
def bench_weights(bench_plant):
    return CostWeights.identity(bench_plant.n, bench_plant.m)


@pytest.fixture(scope="session")
def bench_synth(bench_plant, bench_constraints, bench_weights):
    S_x, S_u = bench_constraints
    return synthesize_llqr(bench_plant, S_x, S_u, BENCH_T, bench_weights, d=BENCH_D)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


INF = math.inf


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
