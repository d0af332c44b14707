#!/usr/bin/env python3
"""Sweep the amplifier's (r1, r2, rx) grid and compare the simulated gain
against the closed form r2 / (r1 + rx).

Usage: python scripts/gain_grid.py [--dt 1e-6] [--periods 5]
"""

import argparse

from ccsim.library import gain_grid, tuning_case


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dt", type=float, default=1e-6)
    ap.add_argument("--periods", type=int, default=5)
    args = ap.parse_args()

    r_values = (100.0, 1e3, 2e3, 10e3, 100e3)
    rx_values = (0.0, 500.0, 1581.0)
    print(f"{'r1':>10} {'r2':>10} {'rx':>8} {'simulated':>14} {'formula':>14} "
          f"{'rel err':>10}  case")
    worst = 0.0
    for r1, r2, rx, sim, ref in gain_grid(
        r_values, r_values, rx_values, dt=args.dt, periods=args.periods
    ):
        err = abs(sim - ref) / ref
        worst = max(worst, err)
        print(f"{r1:10.0f} {r2:10.0f} {rx:8.0f} {sim:14.6f} {ref:14.6f} "
              f"{err:10.2e}  {tuning_case(r1, r2, rx)}")
    print(f"\nworst relative error: {worst:.2e}")


if __name__ == "__main__":
    main()
