#!/usr/bin/env python3
"""Sum rate vs number of beams (users track the beam count as U = 2M)."""

import argparse

from leo_rsma import FrameworkKind, SweepSpec, SystemConfig, run_sweep
from leo_rsma.experiment import DEFAULT_GRIDS
from leo_rsma.model import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--out", default="results_beams.csv")
    ap.add_argument("--config", help="scenario file (defaults otherwise)")
    args = ap.parse_args()

    base = load_config(args.config) if args.config else SystemConfig()
    spec = SweepSpec(swept_parameter="beams", grid=DEFAULT_GRIDS["beams"],
                     trials=args.trials, base=base, output_path=args.out)
    result = run_sweep(spec)

    print(f"wrote {args.out}")
    rates = result.series(FrameworkKind.PROPOSED)
    grid = result.grid()
    for i, (m, r) in enumerate(zip(grid, rates)):
        gain = "" if i == 0 else f"  (+{100 * (r / rates[i - 1] - 1):.1f}% vs M={grid[i - 1]:.0f})"
        print(f"M={m:.0f}: {r / 1e6:8.2f} Mbps{gain}")


if __name__ == "__main__":
    main()
