"""Command line: gen, skyline, run, sweep and emit."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import DataError, InfeasibleSpecError, generate_anticorrelated, group_skyline, load_csv, normalize, write_csv
from .harness import ALGORITHMS, RunConfig, default_seed, parse_axis, run, sweep, sweep_columns
from .report import emit, flatten, load_reports, pivot, rows_to_csv
from .utility import DegenerateUtilityError


def _data_args(p: argparse.ArgumentParser, need_source: bool = True) -> None:
    src = p.add_mutually_exclusive_group(required=need_source)
    src.add_argument("--data", help="input CSV file")
    src.add_argument("--gen", help="generated data, e.g. anticor:n=1000,d=2,C=2[,seed=1]")
    p.add_argument("--group", help="categorical column defining the groups")
    p.add_argument("--columns", help="comma-separated numeric columns (default: all numeric)")
    p.add_argument("--id", dest="id_column", help="identifier column (default: 'id' if present)")
    p.add_argument("--normalize", choices=("minmax", "max", "none"), default="minmax",
                   help="attribute scaling (default: minmax)")
    p.add_argument("--seed", type=int, default=default_seed(),
                   help="random seed (default: $FAIRHMS_SEED or 0)")


def _solver_args(p: argparse.ArgumentParser, multi_alg: bool = False) -> None:
    if multi_alg:
        p.add_argument("--alg", default="bigreedy",
                       help=f"comma-separated algorithms from: {', '.join(ALGORITHMS)}")
    else:
        p.add_argument("--alg", default="bigreedy", help=f"one of: {', '.join(ALGORITHMS)}")
    p.add_argument("--k", type=int, default=10, help="solution size")
    p.add_argument("--bounds", default="prop:alpha=0.1",
                   help="exact:l1,l2,... | prop:alpha=x | bal:alpha=x | free")
    p.add_argument("--m", type=int, help="net size (default 10*k*d)")
    p.add_argument("--delta", type=float, help="net resolution; sets m when --m is absent")
    p.add_argument("--epsilon", type=float, default=0.02)
    p.add_argument("--lambda", dest="lam", type=float, default=0.04, help="stall threshold for bigreedy+")
    p.add_argument("--m0", type=int, help="initial net size for bigreedy+ (default ceil(0.05*M))")
    p.add_argument("--M", type=int, help="largest net size for bigreedy+ (default --m or 10*k*d)")
    p.add_argument("--relaxed", action="store_true",
                   help="bigreedy: keep the full multi-round union (size may exceed k)")
    p.add_argument("--eval-m", type=int, default=10_000, help="validation net size for reported MHR when d > 2")
    p.add_argument("--time-all", action="store_true", help="include loading and preprocessing in wall time")


def _config(args, alg: str | None = None) -> RunConfig:
    return RunConfig(
        alg=alg or args.alg, k=args.k, bounds=args.bounds, data=args.data, gen=args.gen,
        group=args.group, columns=tuple(args.columns.split(",")) if args.columns else None,
        id_column=args.id_column, normalize=args.normalize, m=args.m, delta=args.delta,
        epsilon=args.epsilon, lam=args.lam, m0=args.m0, M=args.M, seed=args.seed,
        relaxed=args.relaxed, eval_m=args.eval_m, time_all=args.time_all,
    )


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    ds = generate_anticorrelated(args.n, args.d, args.C, args.seed)
    write_csv(ds, args.out)
    return 0


def cmd_skyline(args) -> int:
    if args.gen:
        from .harness import load_dataset
        ds = load_dataset(_config_for_data(args))
    else:
        raw = load_csv(args.data, args.columns.split(",") if args.columns else None, args.group, args.id_column)
        ds = raw if args.normalize == "none" else normalize(raw, args.normalize)
    sky = group_skyline(ds)
    write_csv(sky, args.out)
    sizes = ", ".join(f"{name}={int(s)}" for name, s in zip(ds.group_names, ds.skyline_sizes()))
    print(f"skyline: {sky.n} of {ds.n} points ({sizes})", file=sys.stderr)
    return 0


def _config_for_data(args) -> RunConfig:
    return RunConfig(data=args.data, gen=args.gen, group=args.group, normalize=args.normalize, seed=args.seed)


def cmd_run(args) -> int:
    report = run(_config(args))
    text = emit(report, args.format, timing=not args.no_timing)
    _write(text, args.out)
    return 0


def cmd_sweep(args) -> int:
    axes = dict(parse_axis(a) for a in args.sweep)
    algs = [a.strip() for a in args.alg.split(",") if a.strip()]
    rows = sweep(_config(args, algs[0]), axes, algs, pof=args.pof, jobs=args.jobs)
    if args.no_timing:
        for row in rows:
            row.pop("wall_ms", None)
    if args.pivot:
        text = rows_to_csv(pivot([r for r in rows if not r["error"]], list(axes)[0], "algorithm", args.pivot))
    else:
        cols = sweep_columns(list(axes), args.pof)
        if args.no_timing:
            cols.remove("wall_ms")
        text = rows_to_csv(rows, cols)
    _write(text, args.out)
    return 0


def cmd_emit(args) -> int:
    reports = []
    for path in args.inputs:
        reports.extend(load_reports(path))
    if args.pivot:
        index, _, value = args.pivot.partition(":")
        rows = [flatten(r) for r in reports]
        text = rows_to_csv(pivot(rows, index, "algorithm", value or "mhr"))
    else:
        text = emit(reports if len(reports) != 1 else reports[0], args.format)
    _write(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairhms", description="Fair happiness maximizing sets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write an anti-correlated dataset as CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--C", type=int, required=True)
    p.add_argument("--seed", type=int, default=default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("skyline", help="normalize and keep the per-group skylines")
    _data_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_skyline)

    p = sub.add_parser("run", help="solve one instance and print a report")
    _data_args(p)
    _solver_args(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid over one or two parameters, one CSV row per run")
    _data_args(p)
    _solver_args(p, multi_alg=True)
    p.add_argument("--sweep", action="append", required=True, metavar="AXIS=VALUES",
                   help="k=2..10, k=10..50..10 or epsilon=0.01,0.02; axes: k, C, n, d, m, epsilon, lambda")
    p.add_argument("--pof", action="store_true", help="pair every run with an unconstrained one")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--pivot", metavar="METRIC", help="wide table: first axis by algorithm for METRIC")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock columns")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("emit", help="convert saved JSON reports to CSV or a pivot table")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--pivot", metavar="INDEX[:METRIC]", help="e.g. k:mhr")
    p.add_argument("--out")
    p.set_defaults(func=cmd_emit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "sweep", None) and len(args.sweep) > 2:
        parser.error("sweep at most two axes")
    try:
        return args.func(args)
    except (DataError, InfeasibleSpecError, DegenerateUtilityError, ValueError, KeyError,
            NotImplementedError, OSError, json.JSONDecodeError) as exc:
        reason = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {reason}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
