"""Command-line experiment driver.

Subcommands: ``solve``, ``rates``, ``properties``, ``print-config``.
Exit codes: 0 ok, 1 invariant/acceptance failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import config as config_mod
from .errors import ParameterError
from .harness import run_properties, run_rates, run_solve


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torushj",
        description=(
            "Hamilton-Jacobi solvers on the flat torus with a "
            "convergence-rate verification harness"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "rates", "properties", "print-config"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML experiment config", default=None)
        p.add_argument("--out", help="output directory", default="out")
        p.add_argument("--threads", type=int, default=1,
                       help="accepted for interface stability; evaluation is "
                       "deterministic and currently single-threaded")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for randomized property trials")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = (
            config_mod.load(args.config)
            if args.config
            else config_mod.ExperimentConfig()
        )
        if args.seed is not None:
            cfg.properties.seed = args.seed

        if args.command == "print-config":
            sys.stdout.write(config_mod.dumps(cfg))
            return 0
        if args.command == "solve":
            return run_solve(cfg, args.out)
        if args.command == "rates":
            result = run_rates(cfg, args.out)
            for p, fit in result.report.fits.items():
                name = {1.0: "L1", 2.0: "L2", 4.0: "L4", np.inf: "Linf"}[p]
                print(
                    f"{name}: slope={fit['slope']:.4f} r2={fit['r2']:.5f}"
                )
            for key, ok in result.thresholds.items():
                print(f"{key}: {'pass' if ok else 'FAIL'}")
            return result.exit_code
        if args.command == "properties":
            code, results = run_properties(cfg, args.out)
            for r in results:
                status = "pass" if r.passed else "FAIL"
                print(f"{r.name}: {status} (worst margin {r.worst_margin:.3g})")
            return code
    except (ParameterError, FileNotFoundError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
