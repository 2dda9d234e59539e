"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or as a script with
``python3 tests/test_acceptance.py``.  Lines are also collected into the
pytest terminal summary.
"""

import json
import math
import os
import sys
import tempfile
import time

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

from locallqr import (  # noqa: E402
    CostWeights,
    Impulse,
    Infeasible,
    Plant,
    WhiteNoise,
    build_localized_fir_constraints,
    centralized_h2_objective,
    check_localizable,
    evaluate_awgn_cost,
    make_chain_benchmark,
    sensitivity_experiment,
    simulate,
    solve_dare,
    solve_global,
    synthesize_llqr,
)
from locallqr.cli import main as cli_main  # noqa: E402
from locallqr.controller import recursion_deltas  # noqa: E402
from locallqr.feasibility import build_stacked, feas_tol  # noqa: E402
from locallqr.llqr import build_kkt, solve_kkt  # noqa: E402
from locallqr.plant import reduce  # noqa: E402
from instances import small_instance  # noqa: E402
from oracles import dense_qp, monolithic_feasibility  # noqa: E402

TABLE_RATIO = 1.1142
RHO_TARGET = 1.0768
D, T, H = 9, 29, 1.5

RESULTS = {}

_cache = {}


def _bench():
    if "bench" not in _cache:
        plant = make_chain_benchmark()
        S_x, S_u = build_localized_fir_constraints(plant.A_pattern, plant.B_pattern, D, T, H)
        weights = CostWeights.identity(plant.n, plant.m)
        result = synthesize_llqr(plant, S_x, S_u, T, weights, d=D)
        _cache["bench"] = (plant, S_x, S_u, weights, result)
    return _cache["bench"]


def _localizable_instances(count=50, max_seed=2000):
    if "inst" not in _cache:
        found = []
        for seed in range(max_seed):
            inst = small_instance(seed, full_actuation=seed % 2 == 0)
            plant, d, T_, h = inst[:4]
            if check_localizable(plant, d, T_, h).localizable:
                found.append(inst)
            if len(found) == count:
                break
        _cache["inst"] = found
    return _cache["inst"]


def record(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line, flush=True)
    return passed


def _scalar_cost(T_):
    p = Plant(np.array([[2.0]]), np.array([[1.0]]))
    S_x, S_u = build_localized_fir_constraints(p.A_pattern, p.B_pattern, 0, T_, math.inf)
    kkt = build_kkt(build_stacked(reduce(p, 0, 0), S_x, S_u, T_), CostWeights.identity(1, 1))
    return kkt.objective(solve_kkt(kkt).U_r)


def test_criterion_1_benchmark_ratio():
    with tempfile.TemporaryDirectory() as out:
        t0 = time.perf_counter()
        code = cli_main(["compare", "--plant", "chain59", "--d", str(D), "--T", str(T), "--h", str(H), "--out", out])
        elapsed = time.perf_counter() - t0
        with open(os.path.join(out, "compare.json")) as fh:
            ratio = json.load(fh)["columns"][1]["normalized_objective"]
    rel = abs(ratio - TABLE_RATIO) / TABLE_RATIO
    ok = code == 0 and rel <= 0.01 and elapsed < 300
    assert record(
        1, ok, f"ratio {ratio:.6f} vs {TABLE_RATIO} (rel err {rel:.3%}, tol 1%), runtime {elapsed:.1f}s (< 300s)"
    ), RESULTS[1]


def test_criterion_2_spectral_radius():
    rho = make_chain_benchmark().spectral_radius()
    ok = abs(rho - RHO_TARGET) <= 1e-3
    assert record(2, ok, f"rho(A) = {rho:.6f} vs {RHO_TARGET} (tol 1e-3)"), RESULTS[2]


def test_criterion_3_localizability():
    plant, S_x, S_u, _, _ = _bench()
    rep = check_localizable(plant, D, T, H)
    maps = solve_global(plant, S_x, S_u, T, D)
    tr = simulate(plant, maps, Impulse(site=29, time=50), 130)
    times, nodes = np.nonzero(np.abs(tr.x_log) > 1e-9)
    in_space = nodes.min() + 1 >= 21 and nodes.max() + 1 <= 39
    vanishes = np.abs(tr.x_log[51 + T :]).max() <= 1e-9
    ok = rep.localizable and max(rep.residuals) <= rep.tol and in_space and vanishes
    assert record(
        3,
        ok,
        f"{sum(rep.feasible)}/59 columns feasible (max residual {max(rep.residuals):.1e} <= {rep.tol:.1e}); "
        f"support nodes {nodes.min() + 1}..{nodes.max() + 1}, times {times.min()}..{times.max()}, "
        f"max |x| after step {50 + T}: {np.abs(tr.x_log[51 + T:]).max():.1e}",
    ), RESULTS[3]


def test_criterion_4_local_global_oracle():
    agree, feasible, worst, total = 0, 0, 0.0, 0
    topologies = set()
    for seed in range(60):
        plant, d, T_, h, S_x, S_u = small_instance(seed, full_actuation=seed % 2 == 0)
        topologies.add(seed % 3)
        total += 1
        ok_mono = monolithic_feasibility(plant.A, plant.B, S_x, S_u, T_, feas_tol(plant.A))[0]
        local = check_localizable(plant, d, T_, h).localizable
        agree += ok_mono == local
        if local:
            feasible += 1
            worst = max(worst, solve_global(plant, S_x, S_u, T_, d).max_residual(plant))
    ok = total >= 50 and agree == total and worst <= 1e-8 and len(topologies) == 3
    assert record(
        4, ok, f"{agree}/{total} verdicts agree ({feasible} feasible), max recursion residual {worst:.1e} (tol 1e-8)"
    ), RESULTS[4]


def test_criterion_5_llqr_oracle():
    instances = _localizable_instances()
    worst = 0.0
    for plant, d, T_, h, S_x, S_u in instances:
        w = CostWeights.identity(plant.n, plant.m)
        _, obj = synthesize_llqr(plant, S_x, S_u, T_, w, d=d)
        ref = dense_qp(plant.A, plant.B, S_x, S_u, T_, w.Q, w.Rw)[0]
        worst = max(worst, abs(obj - ref) / ref)
    c1, c2 = _scalar_cost(1), _scalar_cost(2)
    ok = len(instances) >= 50 and worst <= 1e-6 and abs(c1 - 5) <= 1e-10 and abs(c2 - 13 / 3) <= 1e-10
    assert record(
        5,
        ok,
        f"{len(instances)} instances, max rel objective gap {worst:.1e} (tol 1e-6); "
        f"scalar costs {c1:.12g} (5), {c2:.12g} (13/3)",
    ), RESULTS[5]


def test_criterion_6_perfect_estimation():
    plant, _, _, _, result = _bench()
    worst = 0.0
    for seed in range(100):
        tr = simulate(plant, result.maps, WhiteNoise(seed=seed), 200)
        worst = max(worst, float(np.abs(tr.we_log - tr.w_log).max()))
    ok = worst <= 1e-10
    assert record(6, ok, f"max |w_e - w| over 100 sequences x 200 steps = {worst:.1e} (tol 1e-10)"), RESULTS[6]


def test_criterion_7_awgn_consistency():
    plant, _, _, weights, result = _bench()
    N, burn, batches = 200_000, 2 * T, 100
    tr = simulate(plant, result.maps, WhiteNoise(seed=0, variance=1.0), N + burn)
    x, u = tr.x_log[burn:], tr.u_log[burn:]
    stage = np.einsum("ki,ij,kj->k", x, weights.Q, x) + np.einsum("ki,ij,kj->k", u, weights.Rw, u)
    mean = float(stage.mean())
    bm = stage[: (N // batches) * batches].reshape(batches, -1).mean(axis=1)
    se = float(bm.std(ddof=1) / math.sqrt(batches))
    expected = evaluate_awgn_cost(result.maps, weights)
    ok = abs(mean - expected) <= 3 * se
    assert record(
        7, ok, f"time average {mean:.4f} vs {expected:.4f}, |gap| {abs(mean - expected):.4f} <= 3 SE = {3 * se:.4f}"
    ), RESULTS[7]


def test_criterion_8_sensitivity():
    plant, _, _, _, result = _bench()
    rep = sensitivity_experiment(plant, result.maps, 1e-6, seed=0, N=300)
    deltas = recursion_deltas(rep.perturbed, plant)
    tr = rep.receding_trace
    worst = 0.0
    for k in range(tr.N):
        acc = tr.w_log[k].copy()
        for tau in range(1, min(T, k) + 1):
            acc += deltas[tau - 1] @ tr.we_log[k - tau]
        worst = max(worst, float(np.abs(tr.we_log[k] - acc).max()))
    ok = rep.receding_final < 1e-2 and rep.naive_final >= 10 * rep.receding_final and worst <= 1e-10
    assert record(
        8,
        ok,
        f"|x[300]| naive {rep.naive_final:.3e}, receding {rep.receding_final:.3e} (< 1e-2), "
        f"identity residual {worst:.1e} (tol 1e-10)",
    ), RESULTS[8]


def test_criterion_9_baseline():
    p = Plant(np.array([[2.0]]), np.array([[1.0]]))
    P = solve_dare(p, CostWeights.identity(1, 1)).P[0, 0]
    plant, _, _, weights, result = _bench()
    sol = solve_dare(plant, weights)
    rho = float(np.abs(np.linalg.eigvals(sol.closed_loop(plant))).max())
    dominated = [centralized_h2_objective(plant, weights) <= result.objective]
    for plant_s, d, T_, h, S_x, S_u in _localizable_instances():
        w = CostWeights.identity(plant_s.n, plant_s.m)
        try:
            _, obj = synthesize_llqr(plant_s, S_x, S_u, T_, w, d=d)
        except Infeasible:
            continue
        dominated.append(centralized_h2_objective(plant_s, w) <= obj * (1 + 1e-12))
    ok = abs(P - (2 + math.sqrt(5))) <= 1e-10 and rho < 1 and all(dominated)
    assert record(
        9,
        ok,
        f"scalar P error {abs(P - (2 + math.sqrt(5))):.1e}; rho(A-BK) = {rho:.4f}; "
        f"centralized <= LLQR on {sum(dominated)}/{len(dominated)} instances",
    ), RESULTS[9]


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
