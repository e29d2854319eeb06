"""Command-line front end: trace generation, runs, comparisons, sweeps."""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import config as cf
from . import report as rp
from . import trace as tr
from . import tracegen as tg
from .engine import ALLOCATOR_KINDS, ConfigError, simulate


def _add_common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a single config key (repeatable)")
    p.add_argument("--out", default=".", help="output directory")


def _load_cfg(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val.strip()
    return cf.load_config(args.config, overrides)


def _load_trace(path):
    with open(path, encoding="ascii") as f:
        trace = tr.read_trace(f)
    errors = tr.validate(trace).errors
    if errors:
        lines = "\n".join(f"  record {i}: {msg}" for i, msg in errors[:20])
        raise ConfigError(f"invalid trace {path}:\n{lines}")
    return trace


def cmd_gen(args):
    spec = tg.WorkloadSpec(
        kind=args.workload, threads=args.threads, total_ops=args.ops,
        seed=args.seed, size_min=args.size_min, size_max=args.size_max,
        window=args.window, compute_gap=args.compute_gap,
        cross_free_fraction=args.cross_free,
    )
    trace = tg.generate(spec)
    path = args.trace or os.path.join(args.out, f"{args.workload}.trace")
    with open(path, "w", encoding="ascii", newline="\n") as f:
        tr.write_trace(trace, f)
    print(f"wrote {path} ({len(trace.records)} records)")
    return 0


def _run_one(trace, cfg, allocator):
    metrics = simulate(trace, cf.build_alloc(cfg, allocator), cf.build_hw(cfg))
    return rp.metrics_to_row(metrics, cf.build_power(cfg)), metrics


def cmd_run(args):
    cfg = _load_cfg(args)
    trace = _load_trace(args.trace)
    row, metrics = _run_one(trace, cfg, args.allocator)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "metrics.csv")
    md_path = os.path.join(args.out, "report.md")
    rp.write_metrics_csv(csv_path, [row])
    with open(md_path, "w", encoding="ascii", newline="\n") as f:
        f.write(rp.render_run_md(metrics, cf.build_power(cfg)))
    print(f"wrote {csv_path} and {md_path}")
    print(f"total cycles: {metrics.total_cycles}")
    return 0


def cmd_compare(args):
    row_a = rp.read_metrics_csv(args.a)[0]
    row_b = rp.read_metrics_csv(args.b)[0]
    text = rp.render_compare_md(row_a, row_b)
    os.makedirs(args.out, exist_ok=True)
    md_path = os.path.join(args.out, "report.md")
    with open(md_path, "w", encoding="ascii", newline="\n") as f:
        f.write(text)
    print(f"wrote {md_path}")
    sys.stdout.write(text)
    return 0


def _resolve_sweep_key(key):
    if key in cf.DEFAULTS:
        return key
    matches = [k for k in cf.DEFAULTS if k.split(".", 1)[1] == key]
    if len(matches) != 1:
        raise ConfigError(f"sweep key {key!r} does not name a unique config key")
    return matches[0]


def _sweep_point(work):
    trace, cfg, allocator = work
    return _run_one(trace, cfg, allocator)[0]


def cmd_sweep(args):
    cfg = _load_cfg(args)
    trace = _load_trace(args.trace)
    key = _resolve_sweep_key(args.key)
    values = [cf.parse_value(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values yielded no sweep points")
    work = [(trace, dict(cfg, **{key: v}), args.allocator) for v in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, work))
    else:
        rows = [_sweep_point(w) for w in work]
    for v, row in zip(values, rows):
        row[key] = str(v)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    rp.write_metrics_csv(csv_path, rows, extra_cols=[key])
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="simalloc",
                                 description="trace-driven allocator simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic workload trace")
    g.add_argument("--workload", required=True, choices=tg.KINDS)
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--ops", type=int, default=10_000)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--size-min", type=int, default=16)
    g.add_argument("--size-max", type=int, default=4096)
    g.add_argument("--window", type=int, default=1024)
    g.add_argument("--compute-gap", type=int, default=0)
    g.add_argument("--cross-free", type=float, default=None)
    g.add_argument("--trace", help="output trace path")
    _add_common(g)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="simulate one trace under one allocator")
    r.add_argument("--trace", required=True)
    r.add_argument("--allocator", required=True, choices=ALLOCATOR_KINDS)
    _add_common(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare two metrics.csv files")
    c.add_argument("--a", required=True, help="metrics.csv of the run under test")
    c.add_argument("--b", required=True, help="metrics.csv of the baseline")
    _add_common(c)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="rerun one config axis over several values")
    s.add_argument("--trace", required=True)
    s.add_argument("--allocator", required=True, choices=ALLOCATOR_KINDS)
    s.add_argument("--key", required=True, help="config key (short names allowed)")
    s.add_argument("--values", required=True, help="comma-separated, K/M/G suffixes ok")
    s.add_argument("--jobs", type=int, default=1)
    _add_common(s)
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, tr.TraceFormatError, tg.SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
