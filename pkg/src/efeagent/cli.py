"""Command-line interface: run a trial, sweep seeds, or self-check."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .config import TrialConfig, load_config
from .harness import run_sweep, run_trial, write_sweep_csv, write_trial_csv


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--agent", choices=("efe", "mpc"), help="controller to run")
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="noise seed (sweeps use seed..seed+n-1)")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--steps", type=int, help="trial length in steps")
    parser.add_argument("--horizon", type=int, help="planning horizon")


def _build_config(args: argparse.Namespace) -> TrialConfig:
    cfg = load_config(args.config) if args.config else TrialConfig()
    overrides = {
        name: getattr(args, name)
        for name in ("agent", "seed", "steps", "horizon")
        if getattr(args, name, None) is not None
    }
    return replace(cfg, **overrides) if overrides else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="efeagent",
        description="Expected-free-energy agent vs MPC on 2D robot navigation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single trial and write its CSV")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="run a multi-seed sweep, write aggregate CSV")
    _add_common(p_sweep)
    p_sweep.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p_sweep.add_argument("--workers", type=int, default=1, help="parallel trial workers")

    p_check = sub.add_parser("check", help="run the built-in oracle/property fixtures")
    p_check.add_argument("--quiet", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            record = run_trial(_build_config(args))
            if args.out:
                write_trial_csv(record, args.out)
            else:
                sys.stdout.write(
                    f"ran {record.steps} steps; final dist_to_goal = "
                    f"{record.dist_to_goal[-1]:.4f} m (use --out to save the CSV)\n"
                )
            return 0
        if args.command == "sweep":
            sweep = run_sweep(_build_config(args), args.seeds, workers=args.workers)
            if args.out:
                write_sweep_csv(sweep, args.out)
            else:
                sys.stdout.write(
                    f"swept {len(sweep.seeds)} seeds; final mean dist_to_goal = "
                    f"{sweep.dist_to_goal_mean[-1]:.4f} m (use --out to save the CSV)\n"
                )
            return 0
        if args.command == "check":
            from .checks import run_checks

            return 0 if run_checks(verbose=not args.quiet) else 1
        raise ValueError(f"unknown command {args.command!r}")
    except Exception as exc:  # surface one machine-readable line and fail
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
