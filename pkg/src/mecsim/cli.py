"""Command-line entry point: ``mecsim simulate | sweep | summarize``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import harness
from .agent.policies import POLICIES
from .config import load_config, full_profile


def _policies(text: str) -> tuple[str, ...]:
    names = tuple(p.strip().upper() for p in text.split(",") if p.strip())
    try:
        return harness.validate_policies(names)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _assignment(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), yaml.safe_load(value)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat YAML file of configuration keys")
    common.add_argument("--set", dest="overrides", type=_assignment, action="append", default=[],
                        metavar="KEY=VALUE", help="override one configuration key (repeatable)")
    common.add_argument("--seed", type=int, help="master seed (default: config seed)")
    common.add_argument("--policies", type=_policies, default=POLICIES,
                        help=f"comma-separated subset of {','.join(POLICIES)}")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress; also keep per-episode records")
    common.add_argument("--paper-scale", action="store_true",
                        help="start from the full-size profile instead of the desk profile")

    parser = argparse.ArgumentParser(prog="mecsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="train and evaluate at one configuration")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", parents=[common], help="run policies over a sweep axis")
    sw.add_argument("--axis", choices=harness.AXES, required=True)
    sw.add_argument("--values", type=_values, required=True, help="comma-separated axis values")
    sw.add_argument("--workers", type=int, default=1, help="parallel sweep points")
    sw.add_argument("--charts", action="store_true", help="also write SVG charts")
    sw.set_defaults(func=cmd_sweep)

    sm = sub.add_parser("summarize", help="compare the learned policy against the baselines")
    sm.add_argument("inputs", nargs="+", type=Path, help="metrics CSV files or sweep directories")
    sm.add_argument("--out", type=Path, help="also write the report here")
    sm.set_defaults(func=cmd_summarize)
    return parser


def _configs(args):
    base = full_profile() if args.paper_scale else None
    return load_config(args.config, base=base, **dict(args.overrides))


def cmd_simulate(args) -> int:
    sim, agent = _configs(args)
    seed = sim.seed if args.seed is None else args.seed
    rows, records = harness.run_point(sim, agent, args.policies, seed, axis_value=sim.arrival_rate,
                                      verbose=args.verbose > 0, progress_every=25 if args.verbose else 0)
    if args.out is not None:
        harness.write_outputs(args.out, rows, records, sim, agent, "arrival_rate", [sim.arrival_rate],
                              args.policies, seed, verbose=args.verbose > 0)
    sys.stdout.write(harness.rows_to_csv(rows))
    return 0


def cmd_sweep(args) -> int:
    sim, agent = _configs(args)
    if args.workers < 1:
        raise ValueError("--workers must be >= 1")
    rows = harness.run_sweep(sim, agent, args.axis, args.values, args.policies, seed=args.seed,
                             out_dir=args.out, workers=args.workers, charts=args.charts,
                             verbose=args.verbose > 0)
    sys.stdout.write(harness.rows_to_csv(rows))
    return 0


def cmd_summarize(args) -> int:
    report = harness.summarize(args.inputs)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(report)
    sys.stdout.write(report)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", 0) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"mecsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
