"""Command-line entry point.

    obstaclewave <command> --config <path> [--out <dir>] [--seed <u64>]

Exit status is 0 when every asserted invariant of the run passed, 1 when
some invariant failed, 2 for configuration errors and 3 for infeasible or
otherwise rejected parameters.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time

from . import pipeline
from .config import _seed, load_config
from .errors import ConfigError, ObstacleWaveError
from .report import write_bundle

log = logging.getLogger("obstaclewave")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obstaclewave",
                                description="Carleman, stability and reconstruction experiments for the "
                                            "exterior wave equation on an annulus.")
    p.add_argument("command", choices=list(pipeline.COMMANDS) + ["all"])
    p.add_argument("--config", required=True, help="sectioned key-value config file")
    p.add_argument("--out", default=None, help="output directory (overrides [run] out)")
    p.add_argument("--seed", default=None, help="unsigned 64-bit seed (overrides [run] seed)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = _seed(args.seed)
        if args.out is not None:
            cfg.out = args.out
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        ctx = pipeline.build_context(cfg)
        sections = pipeline.run_stages(args.command, ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ObstacleWaveError, KeyError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    doc = write_bundle(cfg.out, args.command, cfg, sections, time.perf_counter() - t0,
                       figures=not args.no_figures)
    for s in sections:
        for name, ok in s.checks.items():
            print(f"{'PASS' if ok else 'FAIL'}  {s.name}.{name}")
    print(f"{'PASS' if doc['passed'] else 'FAIL'}  {args.command}  ({doc['timings']['total']:.1f} s, "
          f"report in {cfg.out})")
    return 0 if doc["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
