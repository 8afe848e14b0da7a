"""Command-line entry point: mi-sco-lab <experiment> --config <path>."""

from __future__ import annotations

import argparse
import sys

from .harness import EXPERIMENTS, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mi-sco-lab",
        description="Run one experiment from the registry and emit CSV/plot data.",
    )
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS),
                        help="experiment to run")
    parser.add_argument("--config", required=True, help="config file path")
    parser.add_argument("--seed", type=int, default=None,
                        help="override master_seed")
    parser.add_argument("--out", default=None, help="override output_dir")
    parser.add_argument("--verify", action="store_true",
                        help="exit 2 if any report fails to hold")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code = run(args.config, experiment=args.experiment, seed=args.seed,
               out=args.out, verify=args.verify)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
