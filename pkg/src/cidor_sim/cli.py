"""``cidor-sim`` command line: single runs, sweeps and re-aggregation."""
from __future__ import annotations

import argparse
import itertools
import os
import sys
from multiprocessing import Pool
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, ScenarioConfig, load_config, parse_vary
from .metrics import (
    RUN_COLUMNS,
    AggregationError,
    aggregate_columns,
    aggregate_rows,
    read_rows,
    run_row,
    write_rows,
)
from .mobility import MapError
from .sim import InvariantViolation, run
from .workload import WorkloadError

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3
SWEEP_COLUMNS = RUN_COLUMNS + ["sweep"]


def _workers(jobs: int) -> int:
    cap = os.environ.get("CIDOR_SIM_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, int(cap))
        except ValueError:
            raise ConfigError("CIDOR_SIM_THREADS", f"not an integer: {cap!r}") from None
    return max(1, min(n, jobs))


def _one(job: tuple[str, int, int, str, bool]) -> dict:
    dumped, seed, point, label, check = job
    from .config import parse_text

    cfg = ScenarioConfig(parse_text(dumped))
    row = run_row(run(cfg, seed, check_invariants=check), point)
    row["sweep"] = label
    return row


def cmd_run(args) -> int:
    overrides = {"seed": str(args.seed)} if args.seed is not None else {}
    cfg = load_config(args.config, overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.effective").write_text(_absolute_map(cfg).dumps())
    seed = cfg["seed"]
    if args.trace:
        with open(out / "trace.log", "w") as fh:
            summary = run(cfg, seed, trace=fh, check_invariants=args.check)
    else:
        summary = run(cfg, seed, check_invariants=args.check)
    row = run_row(summary)
    write_rows(out / "run.csv", [row], RUN_COLUMNS)
    print(_describe(row))
    return EXIT_OK


def _absolute_map(cfg: ScenarioConfig) -> ScenarioConfig:
    # the echo must be re-runnable from any directory
    return cfg.with_values({"mobility.map": cfg.map_path()}) if cfg["mobility"] == "spmb" else cfg


def cmd_sweep(args) -> int:
    cfg = _absolute_map(load_config(args.config))
    vary = parse_vary(args.vary or [])
    keys = [k for k, _ in vary]
    points = list(itertools.product(*[vals for _, vals in vary])) or [()]
    jobs = []
    for p, values in enumerate(points):
        point_cfg = cfg.with_values(dict(zip(keys, values)))
        label = ";".join(f"{k}={v}" for k, v in zip(keys, values))
        for i in range(args.seeds):
            jobs.append((point_cfg.dumps(), cfg["seed"] + i, p, label, args.check))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.effective").write_text(cfg.dumps())
    n = _workers(len(jobs))
    if n == 1:
        rows = [_one(j) for j in jobs]
    else:
        with Pool(n) as pool:
            rows = pool.map(_one, jobs, chunksize=1)
    write_rows(out / "runs.csv", rows, SWEEP_COLUMNS)
    agg = aggregate_rows(rows)
    write_rows(out / "aggregate.csv", agg, aggregate_columns() + ["sweep"])
    for row in agg:
        print(_describe(row, suffix="_mean"))
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.inp)
    for name in ("runs.csv", "run.csv"):
        if (src / name).is_file():
            rows = read_rows(src / name)
            break
    else:
        raise ConfigError("--in", f"no runs.csv or run.csv in {src}")
    agg = aggregate_rows(rows)
    write_rows(src / "aggregate.csv", agg, aggregate_columns() + ["sweep"])
    for row in agg:
        print(_describe(row, suffix="_mean"))
    return EXIT_OK


def _describe(row: dict, suffix: str = "") -> str:
    head = f"point={row.get('point', 0)}"
    if row.get("sweep"):
        head += f" [{row['sweep']}]"
    parts = [head, f"router={row['router']}"]
    for m in ("response_ratio", "avg_latency_s", "delivery_ratio", "avg_cost"):
        v = float(row[m + suffix])
        parts.append(f"{m}={v:.4g}")
    return " ".join(parts)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cidor-sim", description="Content-centric DTN simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="one simulation run")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="out")
    r.add_argument("--trace", action="store_true", help="write trace.log")
    r.add_argument("--check", action="store_true", help="verify invariants after every event")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="cartesian sweep over config keys, several seeds each")
    s.add_argument("--config", required=True)
    s.add_argument("--vary", action="append", metavar="KEY=V1,V2,...")
    s.add_argument("--seeds", type=int, default=1)
    s.add_argument("--out", required=True)
    s.add_argument("--check", action="store_true")
    s.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="re-aggregate the run CSVs in a directory")
    p.add_argument("--in", dest="inp", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seeds", 1) < 1:
        print("error: --seeds must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, MapError, WorkloadError, AggregationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
