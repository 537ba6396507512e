"""Command-line interface: ``dgsa run|verify|spectrum <config>``.

``run`` executes the ground-space algorithm and writes the JSON report
(plus an optional CSV of per-stage rows), ``verify`` runs the property
suites and ``spectrum`` exports the dense oracle spectrum. Exit status is
0 on success, 1 when a run aborts or a suite fails, and 2 on bad input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

from .driver import (
    RunConfig,
    degenerate_gsa,
    dumps_report,
    load_config,
    property_suite,
    spectrum_report,
    stages_csv,
)
from .errors import ConfigError, DgsaError, StageError
from .properties import DEFAULT_INSTANCES, SUITE_NAMES


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgsa", description="Degenerate ground-space approximation for 1D chains.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("config", type=Path, help="YAML run configuration")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
        sp.add_argument("--out", type=Path, default=None, help="report path (default: stdout)")
        sp.add_argument("--oracle", choices=("on", "off"), default=None, help="enable the dense oracle")
        sp.add_argument("--net-mode", choices=("exhaustive", "candidates"), default=None, help="contraction net mode")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    run = sub.add_parser("run", help="run the algorithm and write a report")
    common(run)
    run.add_argument("--csv", type=Path, default=None, help="also write per-stage rows as CSV")
    run.add_argument("--timings", action="store_true", help="include wall-clock times (not reproducible)")

    ver = sub.add_parser("verify", help="run the randomized property suites")
    common(ver)
    ver.add_argument("--instances", type=int, default=DEFAULT_INSTANCES, help="instances per suite")
    ver.add_argument("--suite", action="append", choices=SUITE_NAMES, help="run only these suites")

    spec = sub.add_parser("spectrum", help="export the dense oracle spectrum")
    common(spec)
    return p


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    pipeline = config.pipeline
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
        pipeline = replace(pipeline, seed=args.seed)
    if args.oracle is not None:
        kw["oracle"] = args.oracle == "on"
        if not kw["oracle"]:
            pipeline = replace(pipeline, use_oracle_witness=False)
    if args.net_mode is not None:
        pipeline = replace(pipeline, net_mode=args.net_mode)
    return replace(config, pipeline=pipeline, **kw)


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _apply_overrides(load_config(args.config), args)
    except (OSError, ConfigError, TypeError, ValueError) as exc:
        print(f"dgsa: invalid configuration: {exc}", file=sys.stderr)
        return 2

    if args.command == "spectrum":
        _emit(dumps_report(spectrum_report(config)), args.out)
        return 0

    if args.command == "verify":
        report = property_suite(config, instances=args.instances, names=args.suite)
        _emit(dumps_report(report), args.out)
        for s in report["suites"]:
            status = "PASS" if s["passed"] else "FAIL"
            print(
                f"{status} {s['name']}: {s['instances']} instances, {s['violations']} violations, "
                f"min slack {s['min_slack']:.3e}",
                file=sys.stderr,
            )
        return 0 if report["passed"] else 1

    try:
        result = degenerate_gsa(config, timings=args.timings)
    except StageError as exc:
        print(f"dgsa: run aborted: {exc}", file=sys.stderr)
        return 1
    except DgsaError as exc:
        print(f"dgsa: run failed: {exc}", file=sys.stderr)
        return 1
    _emit(dumps_report(result.report), args.out)
    if args.csv is not None:
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        args.csv.write_text(stages_csv(result.stages, timings=args.timings), encoding="utf-8")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
