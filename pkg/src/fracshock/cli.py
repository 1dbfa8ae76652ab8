"""Command-line entry point.

Five subcommands drive the experiment suite::

    fracshock simulate      --config run.yaml [--out DIR] [--seed N]
    fracshock rate-visc     --config run.yaml [--jobs N] [--independent]
    fracshock rate-nonlocal --config run.yaml [--jobs N] [--independent]
    fracshock contdep       --config run.yaml [--jobs N] [--independent]
    fracshock operator-test --config run.yaml

Exit codes: 0 all gates pass, 1 an acceptance gate failed, 2 configuration
error (the message names the offending field), 3 solver/runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .experiments import (
    run_contdep,
    run_operator_test,
    run_rate_nonlocal,
    run_rate_visc,
    run_simulate,
)
from .solver import CflViolation, PicardNonConvergence, StabilityGateError

_COMMANDS = {
    "simulate": run_simulate,
    "rate-visc": run_rate_visc,
    "rate-nonlocal": run_rate_nonlocal,
    "contdep": run_contdep,
    "operator-test": run_operator_test,
}

_EXIT_PASS = 0
_EXIT_GATE_FAIL = 1
_EXIT_CONFIG_ERROR = 2
_EXIT_RUNTIME_ERROR = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracshock",
        description="Numerical laboratory for stochastic fractional conservation laws.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--config", required=True, help="path to the YAML config")
        cmd.add_argument("--jobs", type=int, default=1, help="worker processes")
        cmd.add_argument(
            "--seed", type=int, default=None, help="override experiment.master_seed"
        )
        cmd.add_argument(
            "--out", default=None, help="output directory (default: experiment.out_dir)"
        )
        cmd.add_argument(
            "--independent",
            action="store_true",
            help="disable common-random-numbers coupling in rate studies",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.jobs < 1:
            raise ConfigError("--jobs: must be >= 1")
        out_dir = args.out if args.out is not None else cfg.experiment["out_dir"]
        driver = _COMMANDS[args.command]
        kwargs = {"jobs": args.jobs, "seed_override": args.seed}
        if args.command in ("rate-visc", "rate-nonlocal", "contdep"):
            kwargs["independent"] = args.independent
        result = driver(cfg, out_dir, **kwargs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG_ERROR
    except (CflViolation, StabilityGateError, PicardNonConvergence) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return _EXIT_RUNTIME_ERROR
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return _EXIT_RUNTIME_ERROR

    for path in result.outputs:
        print(f"wrote {path}")
    for name, ok in result.gates.items():
        print(f"gate {name}: {'pass' if ok else 'FAIL'}")
    if args.command == "simulate":
        final = result.summary["final"]
        print(
            "final t={t!r} l1={l1!r} l2_sq={l2_sq!r} tv={tv!r} mass={mass!r}".format(
                **final
            )
        )
        print(f"mass drift {result.summary['mass_drift']!r}")
    if not result.passed:
        print(f"FAILED gates: {', '.join(result.failures())}", file=sys.stderr)
        return _EXIT_GATE_FAIL
    return _EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
