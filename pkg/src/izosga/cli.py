"""Command line entry point: ``izosga <subcommand> --config FILE ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments
from .config import ConfigError

logger = logging.getLogger("izosga")


def _common(p: argparse.ArgumentParser, needs_config: bool = True):
    p.add_argument("--config", required=needs_config, help="experiment TOML file")
    p.add_argument("--out", default=None, help="output directory (default: experiment.output)")
    p.add_argument("--seeds", default=None, help="seed count N or comma list of seed indices")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--svg", action="store_true", help="also write an SVG chart")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="izosga", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("sweep", "constant oracle budgets plus random-IRS baseline"),
        ("schedule", "budget schedules changing at fixed iterations"),
        ("train", "train and write checkpoint.json"),
        ("physical", "sweep on the varactor IRS"),
    ]:
        _common(sub.add_parser(name, help=helptext))
    p = sub.add_parser("deploy", help="evaluate a checkpoint at the deploy budgets")
    _common(p)
    p.add_argument("--checkpoint", default=None, help="checkpoint file (default: OUT/checkpoint.json)")
    p = sub.add_parser("check", help="run the invariant and diagnostic checks")
    _common(p, needs_config=False)
    p.add_argument("--full", action="store_true", help="use the full sample counts")
    return parser


def _spec(args):
    overrides = {}
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    spec = experiments.load_experiment(args.config, overrides)
    if args.out is not None:
        spec.output = Path(args.out)
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "check":
            from .checks import run_checks

            results = run_checks(full=args.full)
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
            if args.out:
                experiments._dump_json([r.__dict__ for r in results], Path(args.out) / "checks.json")
            return 0 if all(r.passed for r in results) else 1
        spec = _spec(args)
        if args.command == "deploy":
            summary = experiments.run_deploy(spec, args.checkpoint, spec.output)
        else:
            expected = {"sweep": ("sweep",), "schedule": ("schedule",), "train": ("train-deploy",),
                        "physical": ("physical",)}[args.command]
            if spec.recipe not in expected:
                logger.warning("experiment recipe is %r; running it as %r", spec.recipe, args.command)
            runner = {"sweep": experiments.run_sweep, "schedule": experiments.run_schedule,
                      "train": experiments.run_train, "physical": experiments.run_physical}[args.command]
            summary = runner(spec, spec.output, workers=args.workers, svg=args.svg)
    except (ConfigError, FileNotFoundError, experiments.CheckpointMismatchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({k: summary[k] for k in ("name", "recipe", "ok") if k in summary}, sort_keys=True))
    if summary.get("failed_runs"):
        print(f"{len(summary['failed_runs'])} run(s) failed; see summary.json", file=sys.stderr)
    return 0 if summary.get("ok") else 1


if __name__ == "__main__":
    sys.exit(main())
