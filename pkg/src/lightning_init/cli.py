"""Command line entry point: ``lightning-init <command> [options]``.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import experiments
from .config import PRESETS, ExperimentConfig, load_config, preset
from .exceptions import (
    ConfigurationError,
    DatasetError,
    InputError,
    NumericalError,
    SchemaVersionError,
)

logger = logging.getLogger("lightning_init")

COMMANDS = ("train", "prune-reinit", "path-curve", "param-study", "cdf")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML/JSON experiment file or a run manifest.json")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named configuration")
    parser.add_argument("--seed", type=int, help="base seed; repeat i uses seed + i")
    parser.add_argument("--out", help="run directory")
    parser.add_argument("--offline", action="store_true", help="never download MNIST")
    parser.add_argument("--repeats", type=int)
    parser.add_argument("--threads", type=int, help="parallel worker processes")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lightning-init",
        description="Sparse graph analysis and lightning initialization of dense networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _common(p)
        if name == "cdf":
            p.add_argument("--weights", help="saved network (.npz) to export instead of training")
    p = sub.add_parser("plot", help="convert a run directory into plot data files")
    p.add_argument("run_dir")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args, kind: str) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigurationError("--config and --preset are mutually exclusive")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = ExperimentConfig(kind=kind)
    if cfg.kind != kind:
        raise ConfigurationError(f"configuration is for {cfg.kind!r}, not {kind!r}")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out"] = args.out
    if args.repeats is not None:
        changes["repeats"] = args.repeats
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.offline:
        changes["data"] = replace(cfg.data, offline=True)
    return replace(cfg, **changes) if changes else cfg


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        if args.command == "plot":
            out = experiments.run_plot(args.run_dir)
        else:
            cfg = resolve_config(args, args.command)
            if args.command == "cdf":
                out = experiments.run_cdf(cfg, weights=args.weights)
            else:
                out = experiments.RUNNERS[cfg.kind](cfg)
    except NumericalError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ConfigurationError, InputError, DatasetError, SchemaVersionError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(out)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
