"""Command line front end: single solves, Monte Carlo sweeps and a self-check.

Exit codes: 0 success, 1 invalid input, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import validate as validation
from .experiment import (ALL_FRAMEWORKS, DEFAULT_GRIDS, SweepSpec,
                         assignment_seed, run_sweep)
from .frameworks import FrameworkKind, run_framework
from .model import ConfigError, SystemConfig, generate_realization, load_config
from .solver import write_trace


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="leo-rsma", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value scenario file")
    common.add_argument("--seed", type=int, help="override the scenario RNG seed")

    p_solve = sub.add_parser("solve", parents=[common],
                             help="solve one channel realization and print the report")
    p_solve.add_argument("--trial", type=int, default=0, help="trial index (default 0)")
    p_solve.add_argument("--framework", default="proposed",
                         choices=[k.value for k in FrameworkKind])
    p_solve.add_argument("--trace", help="write the per-iteration trace CSV here")

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="run a Monte Carlo parameter sweep")
    p_sweep.add_argument("--sweep", default="ptot", choices=list(DEFAULT_GRIDS),
                         help="swept parameter (default ptot)")
    p_sweep.add_argument("--grid", help="comma-separated grid values")
    p_sweep.add_argument("--trials", type=int, default=50,
                         help="Monte Carlo trials per grid point (default 50)")
    p_sweep.add_argument("--frameworks",
                         help="comma-separated subset of "
                              + ",".join(k.value for k in FrameworkKind))
    p_sweep.add_argument("--out", required=True, help="output CSV path")

    sub.add_parser("validate", parents=[common],
                   help="run the built-in oracle checks (exit 0 iff all pass)")
    return parser


def _load_cfg(args) -> SystemConfig:
    cfg = load_config(args.config) if args.config else SystemConfig()
    if args.seed is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    return cfg


def _cmd_solve(args) -> int:
    cfg = _load_cfg(args)
    kind = FrameworkKind.from_name(args.framework)
    real = generate_realization(cfg, args.trial)
    report = run_framework(kind, real, cfg, assignment_seed(cfg, args.trial),
                           record_trace=bool(args.trace))
    if args.trace:
        write_trace(report, args.trace)
    lines = [
        f"framework = {kind.value}",
        f"rng_seed = {cfg.rng_seed}",
        f"trial = {args.trial}",
        f"sum_rate_bps = {report.sum_rate_bps:.12g}",
        f"iterations = {report.iterations}",
        f"converged = {report.converged}",
        f"infeasible_min_rate = {report.infeasible_min_rate}",
    ]
    for name in sorted(report.residuals):
        lines.append(f"residual_{name} = {report.residuals[name]:.12g}")
    for u, rate in enumerate(report.per_user_rates_bps):
        lines.append(f"user_rate_bps[{u}] = {rate:.12g}")
    print("\n".join(lines))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    grid = tuple(DEFAULT_GRIDS[args.sweep]) if args.grid is None else \
        tuple(float(v) for v in args.grid.split(","))
    frameworks = ALL_FRAMEWORKS if args.frameworks is None else \
        tuple(FrameworkKind.from_name(n) for n in args.frameworks.split(","))
    spec = SweepSpec(swept_parameter=args.sweep, grid=grid, trials=args.trials,
                     frameworks=frameworks, base=cfg, output_path=args.out)
    result = run_sweep(spec)
    print(f"wrote {len(result.rows)} aggregate rows to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    cfg = _load_cfg(args)
    ok = validation.run_all(cfg, verbose=True)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_validate(args)
    except (_UsageError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
