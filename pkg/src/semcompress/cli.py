"""Command-line entry point.

Exit codes: 0 success, 1 usage or config error, 2 missing artifact,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, parse_config
from .errors import SemCompError

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_RUNTIME = 0, 1, 2, 3

SUBCOMMANDS = ("gen-world", "train-global", "gen-trajectory", "simulate", "aging", "control",
               "report")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text, 10)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _jobs(text: str) -> int:
    v = int(text, 10)
    if v < 1:
        raise argparse.ArgumentTypeError("--jobs must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="run configuration file")
    common.add_argument("--out-dir", type=Path, default=None,
                        help="artifact directory (default: [output] out_dir, else ./out)")
    common.add_argument("--seed", type=_u64, default=None, help="override master_seed")
    common.add_argument("--jobs", type=_jobs, default=1, help="worker processes for simulate/aging")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")

    parser = _Parser(prog="semcompress",
                     description="Locality-constrained surrogate classifier experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "gen-world": "sample the labeled training set Z",
        "train-global": "train and persist the global RBF classifier f",
        "gen-trajectory": "sample the Metropolis-Hastings observation trajectory",
        "simulate": "run the duplex sampling procedure over the gamma grid",
        "aging": "measure accuracy of stale local classifiers",
        "control": "choose the largest update period meeting the accuracy target",
        "report": "render SVG plots from the CSV outputs",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out_dir is not None:
        out_dir = args.out_dir
    elif cfg["output"]["out_dir"] is not None:
        out_dir = cfg.resolve(cfg["output"]["out_dir"])
    else:
        out_dir = Path("out")

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        return _dispatch(args.command, cfg, out_dir, args.jobs)
    except pipeline.MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (SemCompError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _dispatch(command: str, cfg, out_dir: Path, jobs: int) -> int:
    if command == "gen-world":
        pipeline.gen_world(cfg, out_dir)
    elif command == "train-global":
        m = pipeline.train_global(cfg, out_dir)
        print(f"heldout_accuracy = {m.heldout_accuracy:.6f}")
        print(f"n_support = {m.n_support}")
    elif command == "gen-trajectory":
        rate = pipeline.gen_trajectory(cfg, out_dir)
        print(f"accept_rate = {rate:.6f}")
    elif command == "simulate":
        pipeline.simulate(cfg, out_dir, jobs)
    elif command == "aging":
        pipeline.aging(cfg, out_dir, jobs)
    elif command == "control":
        d = pipeline.control(cfg, out_dir)
        print(f"gamma0 = {d.gamma0}")
        print(f"target_met = {'true' if d.target_met else 'false'}")
    elif command == "report":
        for p in pipeline.report(cfg, out_dir):
            logging.getLogger("semcompress").info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
