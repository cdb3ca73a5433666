"""Command-line experiment runner.

    diffeolab all --config cfg.json --out results/

Exit status: 0 if every check passed, 1 if any check failed, 2 if no check
failed but some could not be run (status ``error``), 3 for a bad config.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import kernels
from .config import ExperimentConfig
from .errors import DiffeoLabError
from .suites import SUITES, Context, Report, run_suite

VERBS = tuple(SUITES) + ("all",)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffeolab", description=__doc__.splitlines()[0])
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--imax", type=int, help="largest level i (even)")
    p.add_argument("--grid", type=int, help="uniform grid size for equality checks")
    p.add_argument("--jobs", type=int, help="suites run concurrently (threads)")
    p.add_argument("--quiet", action="store_true")
    return p


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.out:
        cfg.out = args.out
    if args.imax is not None:
        cfg.i_max = args.imax
    if args.grid is not None:
        cfg.grid = args.grid
    if args.jobs is not None:
        cfg.jobs = args.jobs
    return cfg.validate()


def run(cfg: ExperimentConfig, names) -> list[Report]:
    ctx = Context(cfg)
    if cfg.jobs > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(lambda n: run_suite(n, ctx), names))
    return [run_suite(n, ctx) for n in names]


def write_outputs(cfg: ExperimentConfig, reports: list[Report], seconds: float) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        for fname, body in rep.csv.items():
            (out / fname).write_text(body)
        for fname, obj in rep.artifacts.items():
            (out / fname).write_text(json.dumps(obj, indent=2, sort_keys=True, default=str))
    summary = {
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "backend": kernels.BACKEND,
        "seconds": round(seconds, 3),
        "suites": [r.to_json() for r in reports],
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2, default=str))
    return out


def exit_code(reports: list[Report]) -> int:
    if any(r.failed for r in reports):
        return 1
    if any(r.errored for r in reports):
        return 2
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except DiffeoLabError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    names = list(SUITES) if args.verb == "all" else [args.verb]
    t0 = time.perf_counter()
    reports = run(cfg, names)
    out = write_outputs(cfg, reports, time.perf_counter() - t0)
    if not args.quiet:
        for rep in reports:
            print(f"== {rep.suite} ({rep.seconds:.1f}s)")
            for r in rep.records:
                extra = f"  [{r.note}]" if r.note else ""
                print(f"  {r.status.upper():7s} {r.name}: measured={r.measured} "
                      f"threshold={r.threshold}{extra}")
        print(f"report written to {out / 'report.json'}")
    return exit_code(reports)


if __name__ == "__main__":
    sys.exit(main())
