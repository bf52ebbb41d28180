"""Command line entry points: run experiments, compare runs, synthesize data.

Exit codes: 0 success, 2 configuration error, 3 inference failure (zero
acceptance / all sites skipped / stuck baseline chain), 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .errors import (
    AbortedOnFailure,
    ConfigError,
    EpabcError,
    IncompatibleRuns,
    StuckChain,
    TooManySkips,
    ZeroAcceptance,
)
from .runner import compare_runs, load_config, run_experiment, write_dataset_csv

_FAILURES = (ZeroAcceptance, TooManySkips, AbortedOnFailure, StuckChain)


def resolve_config(name: str) -> Path:
    """Accept a filesystem path or the name of a bundled config."""
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("epabc") / "configs" / f"{name}.cfg"
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config {name!r} is neither a file nor a bundled config name")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epabc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("config", help="config file path or bundled config name")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--threads", type=int, default=1, help="moment-oracle worker threads")
    p_run.add_argument("--out", default=None, help="output directory (default: config 'output')")

    p_cmp = sub.add_parser("compare", help="tabulate two or more completed runs")
    p_cmp.add_argument("dirs", nargs="+", help="run output directories")

    p_gen = sub.add_parser("gen-data", help="synthesize the config's dataset as CSV")
    p_gen.add_argument("config", help="config file path or bundled config name")
    p_gen.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_gen.add_argument("--out", default=None, help="CSV path (default: <output>/dataset.csv)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config_path = resolve_config(args.config)
            cfg = load_config(config_path)
            out_dir = args.out or cfg.get("output") or f"runs/{cfg['model']['id']}"
            result = run_experiment(cfg, out_dir, seed=args.seed, threads=args.threads,
                                    base_dir=config_path.parent)
            print(f"run complete: {result.out_dir} "
                  f"(evidence {result.posterior['log_evidence']:.4f}, "
                  f"skips {result.posterior['skips']}, "
                  f"draws {result.posterior['sim_draws_total']})")
            return 0
        if args.command == "compare":
            sys.stdout.write(compare_runs(args.dirs))
            return 0
        if args.command == "gen-data":
            config_path = resolve_config(args.config)
            cfg = load_config(config_path)
            out = args.out or str(Path(cfg.get("output") or ".") / "dataset.csv")
            path = write_dataset_csv(cfg, out, seed=args.seed)
            print(f"dataset written: {path}")
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _FAILURES as exc:
        print(f"inference failure: {exc}", file=sys.stderr)
        return 3
    except IncompatibleRuns as exc:
        print(f"comparison error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except EpabcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
