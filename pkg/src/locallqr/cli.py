"""Command-line interface: ``check``, ``synth``, ``simulate`` and ``compare``.

Sites and columns on the command line and in every output file are
1-based.  Exit codes: 0 success, 1 infeasible or diverged, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from .baseline import solve_dare
from .controller import (
    Impulse,
    SimTrace,
    WhiteNoise,
    perturb_maps_fir,
    random_deltas,
    read_log_csv,
    simulate,
)
from .errors import Infeasible, NoConvergence, SimulationDiverged
from .feasibility import check_localizable, load_maps, save_maps
from .llqr import CostWeights, synthesize_llqr
from .plant import Plant, load_plant, make_chain, make_chain_benchmark
from .sparsity import build_localized_fir_constraints, graph_distance

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    plant: str
    d: int
    T: int
    h: float
    weights: str = "identity"
    out: str = "."
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if self.d < 0:
            raise UsageError("--d must be >= 0")
        if self.T < 1:
            raise UsageError("--T must be >= 1")
        if not self.h >= 1:
            raise UsageError("--h must be >= 1 (use 'inf' for no communication delay)")


def resolve_plant(source: str) -> Plant:
    if source == "chain59":
        return make_chain_benchmark()
    match = re.fullmatch(r"chain(\d+)", source)
    if match and not os.path.exists(source):
        return make_chain(int(match.group(1)))
    if not os.path.exists(source):
        raise UsageError(f"plant {source!r} is neither a builtin nor an existing file")
    try:
        return load_plant(source)
    except ValueError as exc:
        raise UsageError(f"cannot read plant file {source}: {exc}") from exc


def resolve_weights(source: str, plant: Plant) -> CostWeights:
    """``identity`` or a file: ``n m`` then n rows of Q and m rows of Rw."""
    if source == "identity":
        return CostWeights.identity(plant.n, plant.m)
    try:
        with open(source) as fh:
            tokens = fh.read().split()
        n, m = int(tokens[0]), int(tokens[1])
        vals = np.array([float(t) for t in tokens[2:]])
        if (n, m) != (plant.n, plant.m) or vals.size != n * n + m * m:
            raise ValueError("dimensions do not match the plant")
        weights = CostWeights(vals[: n * n].reshape(n, n), vals[n * n :].reshape(m, m))
    except (OSError, ValueError, IndexError) as exc:
        raise UsageError(f"cannot read weights file {source}: {exc}") from exc
    return weights


def parse_h(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    if str(text).lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def read_config_file(path: str) -> dict:
    """key=value lines; '#' starts a comment; keys mirror long flag names."""
    cfg = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def _fmt17(x: float) -> str:
    return format(float(x), ".17g")


def _fmt6(x: float) -> str:
    return format(float(x), ".6g")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_config(args) -> RunConfig:
    missing = [flag for flag in ("d", "T", "h") if getattr(args, flag, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join(f"--{f}" for f in missing))
    try:
        cfg = RunConfig(
            plant=args.plant,
            d=int(args.d),
            T=int(args.T),
            h=parse_h(args.h),
            weights=args.weights,
            out=args.out,
            seed=int(args.seed),
            workers=int(args.workers) if args.workers else None,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    os.makedirs(cfg.out, exist_ok=True)
    return cfg


def _constraints(plant: Plant, cfg: RunConfig):
    try:
        return build_localized_fir_constraints(plant.A_pattern, plant.B_pattern, cfg.d, cfg.T, cfg.h)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_check(args) -> int:
    cfg = _run_config(args)
    plant = resolve_plant(cfg.plant)
    try:
        report = check_localizable(plant, cfg.d, cfg.T, cfg.h, workers=cfg.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    path = os.path.join(cfg.out, "check_report.json")
    write_json(path, report.to_dict())
    if report.localizable:
        print(f"localizable: all {plant.n} columns feasible (d={cfg.d}, T={cfg.T}, h={cfg.h:g})")
        return EXIT_OK
    cols = ", ".join(str(j + 1) for j in report.failing_columns)
    print(f"not localizable: {len(report.failing_columns)} infeasible column(s): {cols}")
    return EXIT_FAIL


def _synthesize(plant, weights, cfg):
    S_x, S_u = _constraints(plant, cfg)
    return synthesize_llqr(plant, S_x, S_u, cfg.T, weights, d=cfg.d, workers=cfg.workers)


def cmd_synth(args) -> int:
    cfg = _run_config(args)
    plant = resolve_plant(cfg.plant)
    weights = resolve_weights(cfg.weights, plant)
    try:
        result = _synthesize(plant, weights, cfg)
    except Infeasible as exc:
        cols = ", ".join(str(j + 1) for j in exc.columns)
        print(f"infeasible column(s): {cols}", file=sys.stderr)
        return EXIT_FAIL
    maps_path = args.maps_out or os.path.join(cfg.out, "maps.txt")
    save_maps(result.maps, maps_path)
    report = result.report()
    if not args.timing:
        for col in report["columns"]:
            col.pop("seconds")
    payload = {"objective": report["objective"], "d": cfg.d, "T": cfg.T, "h": _json_h(cfg.h), "columns": report["columns"]}
    line = f"objective {_fmt17(result.objective)}"
    if args.baseline:
        try:
            central = float(np.trace(solve_dare(plant, weights).P))
        except NoConvergence as exc:
            print(f"baseline failed: {exc}", file=sys.stderr)
            return EXIT_FAIL
        payload["centralized_objective"] = central
        payload["ratio"] = result.objective / central
        line += f"  centralized {_fmt17(central)}  ratio {_fmt17(result.objective / central)}"
    write_json(os.path.join(cfg.out, "synth_report.json"), payload)
    print(line)
    return EXIT_OK


def _json_h(h: float):
    return "inf" if math.isinf(h) else h


def _disturbance(args, plant: Plant, N: int):
    chosen = [x for x in (args.impulse, args.awgn, args.disturbance) if x]
    if len(chosen) > 1:
        raise UsageError("choose exactly one of --impulse, --awgn, --disturbance")
    if args.impulse:
        try:
            site_s, time_s = str(args.impulse).split(":")
            site, t = int(site_s), int(time_s)
        except ValueError as exc:
            raise UsageError("--impulse expects SITE:TIME, e.g. 30:50") from exc
        if not 1 <= site <= plant.n:
            raise UsageError(f"impulse site must be in 1..{plant.n}")
        return Impulse(site=site - 1, time=t)
    if args.awgn:
        return WhiteNoise(seed=int(args.seed), variance=float(args.variance))
    if args.disturbance:
        try:
            w = read_log_csv(args.disturbance)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read disturbance file: {exc}") from exc
        if w.shape[1] != plant.n:
            raise UsageError(f"disturbance file has {w.shape[1]} columns, plant has {plant.n} states")
        out = np.zeros((N, plant.n))
        rows = min(N, w.shape[0])
        out[:rows] = w[:rows]
        return out
    return None


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    plant = resolve_plant(cfg.plant)
    N = int(args.N)
    if N < 0:
        raise UsageError("--N must be nonnegative")
    if args.maps:
        try:
            maps = load_maps(args.maps)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read maps: {exc}") from exc
        if (maps.n, maps.m) != (plant.n, plant.m):
            raise UsageError(f"maps are {maps.n}x{maps.m}, plant is {plant.n}x{plant.m}")
    else:
        weights = resolve_weights(cfg.weights, plant)
        try:
            maps = _synthesize(plant, weights, cfg).maps
        except Infeasible as exc:
            print(f"infeasible column(s): {', '.join(str(j + 1) for j in exc.columns)}", file=sys.stderr)
            return EXIT_FAIL
    dist = _disturbance(args, plant, N)
    if args.perturb:
        rng = np.random.default_rng(cfg.seed)
        maps = perturb_maps_fir(maps, plant, random_deltas(plant.n, maps.T, float(args.perturb), rng))
    try:
        trace = simulate(plant, maps, dist, N, scheme=args.scheme)
        status = EXIT_OK
    except SimulationDiverged as exc:
        trace = exc.trace
        print(f"diverged: |x|_inf exceeded the overflow guard at step {exc.step} ({args.scheme} scheme)", file=sys.stderr)
        status = EXIT_FAIL
    trace.write_csv(cfg.out)
    if status == EXIT_OK:
        print(f"simulated {N} steps ({args.scheme}); max |x| = {_fmt6(np.abs(trace.x_log).max() if N else 0.0)}")
    return status


def _diameter(plant: Plant) -> int:
    best = 0
    for j in range(plant.n):
        for s in range(plant.n):
            dist = graph_distance(plant.A_pattern, j, s)
            if dist is not None:
                best = max(best, dist)
    return best


def cmd_compare(args) -> int:
    try:
        d_values = [int(v) for v in str(args.d).split(",")] if args.d is not None else None
    except ValueError as exc:
        raise UsageError("--d expects an integer or a comma-separated list") from exc
    if d_values is None:
        raise UsageError("missing required option(s): --d")
    plant = resolve_plant(args.plant)
    first = argparse.Namespace(**{**vars(args), "d": d_values[0]})
    cfg = _run_config(first)
    weights = resolve_weights(cfg.weights, plant)
    try:
        central = float(np.trace(solve_dare(plant, weights).P))
    except NoConvergence as exc:
        print(f"baseline failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    diam = _diameter(plant)
    columns = [
        {
            "scheme": "Ideal H2",
            "comm_speed": "inf",
            "control_time": "inf",
            "locality": f"Max({diam})",
            "objective": central,
            "normalized_objective": 1.0,
        }
    ]
    status = EXIT_OK
    for d in d_values:
        cfg_d = RunConfig(plant=cfg.plant, d=d, T=cfg.T, h=cfg.h, weights=cfg.weights, out=cfg.out, seed=cfg.seed, workers=cfg.workers)
        entry = {
            "scheme": "LLQR",
            "comm_speed": _json_h(cfg.h),
            "control_time": cfg.T,
            "locality": d,
        }
        try:
            result = _synthesize(plant, weights, cfg_d)
            entry["objective"] = result.objective
            entry["normalized_objective"] = result.objective / central
        except Infeasible as exc:
            entry["objective"] = None
            entry["normalized_objective"] = None
            entry["infeasible_columns"] = [j + 1 for j in exc.columns]
            status = EXIT_FAIL
        columns.append(entry)
    write_json(os.path.join(cfg.out, "compare.json"), {"centralized_objective": central, "columns": columns})
    print(format_table(columns))
    return status


def format_table(columns: list[dict]) -> str:
    heads = [""] + [c["scheme"] if c["scheme"] != "LLQR" else f"LLQR(d={c['locality']})" for c in columns]
    rows = [
        ["Comm Speed"] + [str(c["comm_speed"]).capitalize() if c["comm_speed"] == "inf" else _fmt6(c["comm_speed"]) for c in columns],
        ["Control Time"] + [str(c["control_time"]).capitalize() for c in columns],
        ["Locality"] + [str(c["locality"]) for c in columns],
        ["Objective"]
        + ["infeasible" if c["normalized_objective"] is None else _fmt6(c["normalized_objective"]) for c in columns],
    ]
    widths = [max(len(r[i]) for r in [heads] + rows) for i in range(len(heads))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in [heads] + rows]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file mirroring long flags; flags override")
    common.add_argument("--plant", default="chain59", help="chain59, chainN or a plant file")
    common.add_argument("--d", help="locality radius (compare: comma-separated list allowed)")
    common.add_argument("--T", help="FIR horizon")
    common.add_argument("--h", help="communication speed ratio (>= 1, or 'inf')")
    common.add_argument("--weights", default="identity", help="identity or a weights file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", default=0, type=int)
    common.add_argument("--workers", default=None, type=int, help="threads for per-column solves")

    parser = argparse.ArgumentParser(prog="locallqr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("check", parents=[common], help="per-column localizability test")

    p = sub.add_parser("synth", parents=[common], help="localized LQR synthesis")
    p.add_argument("--maps-out", help="maps file path (default OUT/maps.txt)")
    p.add_argument("--baseline", action="store_true", help="also report the centralized ratio")
    p.add_argument("--timing", action="store_true", help="include per-column timings in the report")

    p = sub.add_parser("simulate", parents=[common], help="closed-loop simulation")
    p.add_argument("--maps", help="maps file from 'synth' (synthesized in-process if omitted)")
    p.add_argument("--N", default=100, type=int, help="number of steps")
    p.add_argument("--scheme", choices=["receding", "naive"], default="receding")
    p.add_argument("--impulse", help="SITE:TIME unit impulse (1-based site)")
    p.add_argument("--awgn", action="store_true", help="white Gaussian disturbance seeded by --seed")
    p.add_argument("--variance", default=1.0, type=float)
    p.add_argument("--disturbance", help="CSV disturbance file (same layout as w.csv)")
    p.add_argument("--perturb", type=float, default=0.0, help="scale of random synthesis errors")

    sub.add_parser("compare", parents=[common], help="centralized vs localized objective table")
    return parser


COMMANDS = {"check": cmd_check, "synth": cmd_synth, "simulate": cmd_simulate, "compare": cmd_compare}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre, _ = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(pre, "config", None):
            cfg = read_config_file(pre.config)
            sub = parser._subparsers._group_actions[0].choices[pre.command]
            known = {a.dest for a in sub._actions}
            unknown = set(cfg) - known
            if unknown:
                raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
            sub.set_defaults(**cfg)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
