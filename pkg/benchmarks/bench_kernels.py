"""Compare the compiled and NumPy simulation kernels on the chain benchmark.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""

import argparse
import time

import numpy as np

from locallqr import CostWeights, WhiteNoise, build_localized_fir_constraints, make_chain_benchmark, synthesize_llqr
from locallqr.controller import simulate
from locallqr.kernels import available_backends


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    plant = make_chain_benchmark()
    S_x, S_u = build_localized_fir_constraints(plant.A_pattern, plant.B_pattern, 9, 29, 1.5)
    maps = synthesize_llqr(plant, S_x, S_u, 29, CostWeights.identity(plant.n, plant.m), d=9).maps
    w = WhiteNoise(seed=0)

    rows = []
    for scheme in ("receding", "naive"):
        steps = args.steps if scheme == "receding" else min(args.steps, 300)
        base = None
        for backend in available_backends():
            secs = best_of(lambda: simulate(plant, maps, w, steps, scheme, backend=backend), args.repeat)
            base = base or secs
            rows.append((scheme, backend, steps, secs, steps / secs))
        if len(available_backends()) == 2:
            ref = simulate(plant, maps, w, steps, scheme, backend="python").x_log
            got = simulate(plant, maps, w, steps, scheme, backend="cython").x_log
            rows.append((scheme, "max |diff|", steps, float(np.abs(ref - got).max()), None))

    print(f"{'scheme':<10}{'backend':<12}{'steps':>8}{'seconds':>12}{'steps/s':>14}")
    for scheme, backend, steps, secs, rate in rows:
        if rate is None:
            print(f"{scheme:<10}{backend:<12}{steps:>8}{secs:>12.2e}")
        else:
            print(f"{scheme:<10}{backend:<12}{steps:>8}{secs:>12.4f}{rate:>14.0f}")
    if len(available_backends()) == 2:
        rec = {b: s for sc, b, _, s, r in rows if sc == "receding" and r}
        print(f"receding speedup (python / cython): {rec['python'] / rec['cython']:.1f}x")


if __name__ == "__main__":
    main()
