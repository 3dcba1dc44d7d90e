#!/usr/bin/env python3
"""Sum rate vs total power budget for all three frameworks.

Writes the aggregate table to results_ptot.csv and prints the percentage
gains of the proposed scheme over both benchmarks at every grid point.
"""

import argparse

from leo_rsma import FrameworkKind, SweepSpec, SystemConfig, run_sweep
from leo_rsma.experiment import DEFAULT_GRIDS
from leo_rsma.model import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--out", default="results_ptot.csv")
    ap.add_argument("--config", help="scenario file (defaults otherwise)")
    args = ap.parse_args()

    base = load_config(args.config) if args.config else SystemConfig()
    spec = SweepSpec(swept_parameter="ptot", grid=DEFAULT_GRIDS["ptot"],
                     trials=args.trials, base=base, output_path=args.out)
    result = run_sweep(spec)

    print(f"wrote {args.out}")
    grid = result.grid()
    for bench in (FrameworkKind.BENCHMARK1_EQUAL_POWER,
                  FrameworkKind.BENCHMARK2_RANDOM_ASSIGN):
        gains = result.gains_over(bench)
        line = "  ".join(f"{v:.0f}W:{g:+.1f}%" for v, g in zip(grid, gains))
        print(f"gain over {bench.value}: {line}")


if __name__ == "__main__":
    main()
