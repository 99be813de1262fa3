"""Command line entry point: ``anderson-levels run`` and ``anderson-levels selftest``."""

from __future__ import annotations

import argparse
import json
import sys

from ..parallel import RealizationError
from ..spectral_stats import HypothesisError
from .config import ConfigError, parse_config

EXIT_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anderson-levels", description="Monte Carlo experiments for the discrete Anderson model.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("--config", required=True, help="path to the JSON config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--workers", type=int, default=None, help="worker processes (default: ANDERSON_LEVELS_WORKERS or 1)")
    run.add_argument("--out", default=None, help="output directory (default: results/<experiment>)")
    st = sub.add_parser("selftest", help="closed-form checks and a determinism check")
    st.add_argument("--workers", type=int, nargs="+", default=[1, 8], help="worker counts compared for determinism")
    return p


def _run(args) -> int:
    from .runner import run_experiment

    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        cfg = parse_config(json.dumps(raw))
        status, summary = run_experiment(cfg, workers=args.workers, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except HypothesisError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except RealizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, ok in summary["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return status


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _run(args)
    from .selftest import run_selftest

    return 0 if run_selftest(worker_counts=tuple(args.workers)) else 1


if __name__ == "__main__":
    sys.exit(main())
