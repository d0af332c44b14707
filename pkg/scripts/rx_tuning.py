#!/usr/bin/env python3
"""Extract the translinear conveyor's X-terminal resistance over a bias
sweep and compare it with 1/sqrt(8*beta*ib).

Usage: python scripts/rx_tuning.py [--rails 1.5]
"""

import argparse

from ccsim.library import expected_rx, measure_rx_emergent
from ccsim.netlist import parse_value


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rails", type=parse_value, default=1.5)
    args = ap.parse_args()

    print(f"{'ib [uA]':>8} {'extracted [ohm]':>16} {'formula [ohm]':>14} {'ratio':>7}")
    for ib in (12.5e-6, 25e-6, 50e-6, 100e-6, 200e-6):
        rx = measure_rx_emergent(ib, rails=args.rails)
        ref = expected_rx(ib)
        print(f"{ib * 1e6:8.1f} {rx:16.1f} {ref:14.1f} {rx / ref:7.3f}")
    print("\ndoubling the bias current divides the resistance by sqrt(2)")


if __name__ == "__main__":
    main()
