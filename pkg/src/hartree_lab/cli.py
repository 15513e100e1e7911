"""Command-line entry point: ``hartree-lab <experiment> --config FILE``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import EXPERIMENTS, ConfigError, configure_threads, dump_error, execute, load_config


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hartree-lab", description="Hartree equation experiments")
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, type=Path, help="YAML experiment config")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, help="FFT worker threads (default: HS_THREADS or 1)")
        p.add_argument("--seed", type=int, help="seed for random initial data (overrides the config)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        cfg = load_config(args.config, seed=args.seed)
        if cfg["experiment"] is None:
            cfg["experiment"] = args.experiment
        if cfg["experiment"] != args.experiment:
            raise ConfigError(f"config declares experiment {cfg['experiment']!r} but "
                              f"subcommand is {args.experiment!r}", "experiment")
        if out is None:
            out = Path(cfg["output"])
            if not out.is_absolute():
                out = Path(cfg["_base"]) / out
        threads = configure_threads(args.threads if args.threads is not None else cfg["threads"])
        cfg["threads"] = threads
        return execute(cfg, out)
    except (ConfigError, OSError) as exc:
        print(dump_error(exc, out), file=sys.stderr)
        return 2
    except Exception as exc:
        print(dump_error(exc, out), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
