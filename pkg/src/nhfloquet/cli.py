"""Command-line entry point: ``nhfloquet <experiment> [flags]``."""
from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import run_experiment


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhfloquet", description="Floquet AFAI experiments with ancilla-driven correction.")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=_u64, help="base seed for disorder realizations")
    common.add_argument("--realizations", type=int)
    common.add_argument("--cycles", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--no-correction", action="store_true", help="entangle with the ancilla but skip the conditional swap")
    common.add_argument("--gamma", type=float, help="swap-failure noise strength")
    common.add_argument("--gamma2", type=float, help="neighbour-leak noise strength")
    common.add_argument("--w", type=float, help="chemical-potential disorder W")
    common.add_argument("--wt", type=float, help="temporal disorder W_T")
    common.add_argument("--subdiv", type=int, metavar="M", help="slices per drive step for localization")
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "experiment": args.experiment,
        "run.base_seed": args.seed,
        "run.realizations": args.realizations,
        "run.cycles": args.cycles,
        "output.directory": args.out,
        "run.correction_enabled": False if args.no_correction else None,
        "physics.gamma": args.gamma,
        "physics.gamma2": args.gamma2,
        "physics.W": args.w,
        "physics.W_T": args.wt,
        "run.M": args.subdiv,
    }
    try:
        cfg = load_config(args.config, overrides)
        tables = run_experiment(cfg)
    except (ConfigError, OSError, RuntimeError) as exc:
        print(f"nhfloquet: error: {exc}", file=sys.stderr)
        return 1
    for fname, table in tables.items():
        print(f"{cfg.output.directory}/{fname}: {len(table.rows)} rows")
    return 0


if __name__ == "__main__":
    sys.exit(main())
