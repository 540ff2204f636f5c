"""Command-line entry point.

Exit codes: 0 on success, 1 when a verification fails, 2 on config or I/O
errors. ``DISCBANDIT_WORKERS`` overrides the number of worker processes.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import suites
from .config import load_config
from .core import BanditError, ConfigError
from .engine import run_experiment
from .export import export_named

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
WORKERS_ENV = "DISCBANDIT_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or cfg.output or ".")
    stem = Path(args.config).stem
    result = run_experiment(cfg, workers=args.workers)
    rounds, summary = export_named(result, out, stem)
    print(f"wrote {rounds} and {summary}")
    print(
        f"t={cfg.T}: mean avg reward {result.mean_avg_reward[-1]:.6g} "
        f"(sd {result.std_avg_reward[-1]:.6g}), mean dreg {result.mean_delta_reg[-1]:.6g}"
    )
    return EXIT_OK


def cmd_panel(args) -> int:
    names = list(suites.PANELS) if args.name == "all" else [args.name]
    for name in names:
        res = suites.run_panel(name, args.out_dir, args.T, args.trials, args.seed, args.workers)
        _, line = suites.panel_margin(name, res)
        print(line)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite == "concentration":
        rep = suites.verify_concentration(replicates=args.replicates, seed=args.seed)
    elif args.suite == "discrepancy-zero":
        rep = suites.verify_discrepancy_zero(seed=args.seed)
    else:
        rep = suites.verify_log_growth(trials=args.trials, seed=args.seed, workers=args.workers)
    for line in rep.lines:
        print(line)
    print(f"{rep.name}: {'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="discbandit", description="Discrepancy-based bandit experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("--workers", type=int, default=None, help=f"worker processes (default: ${WORKERS_ENV} or CPU count)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: config 'output' key or cwd)")
    r.set_defaults(func=cmd_run)

    pa = sub.add_parser("panel", help="run a panel (or all) with both policies and write CSVs")
    pa.add_argument("name", choices=[*suites.PANELS, "all"])
    pa.add_argument("out_dir")
    pa.add_argument("-T", type=int, default=suites.PANEL_T)
    pa.add_argument("--trials", type=int, default=suites.PANEL_TRIALS)
    pa.add_argument("--seed", type=int, default=0)
    pa.set_defaults(func=cmd_panel)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=["concentration", "log-growth", "discrepancy-zero"])
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--replicates", type=int, default=100_000)
    v.add_argument("--trials", type=int, default=50)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.workers is None:
            args.workers = default_workers()
        if args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")
        return args.func(args)
    except RuntimeError as exc:
        # trial failures arrive wrapped with the trial index
        if isinstance(exc.__cause__, BanditError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        raise
    except (BanditError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
