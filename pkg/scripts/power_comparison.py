#!/usr/bin/env python3
"""Average and peak supply power of the four transistor-level amplifier
variants at identical rails and bias current.

The two-conveyor arrangements burn more than the single-conveyor ones,
and the bias-controlled (class-AB translinear) conveyor burns more than
the plain class-A follower at the same conveyor count.

Usage: python scripts/power_comparison.py [--ib 50u-style amps] [--rails 1.0]
"""

import argparse

from ccsim.library import power_comparison
from ccsim.netlist import parse_value


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ib", type=parse_value, default=50e-6, help="bias current, A")
    ap.add_argument("--rails", type=parse_value, default=1.0, help="rail magnitude, V")
    args = ap.parse_args()

    res = power_comparison(ib=args.ib, rails=args.rails)
    print(f"{'circuit':20} {'conveyors':>9} {'P_avg [W]':>12} {'P_peak [W]':>12}")
    counts = {"ferri_2cc_ccii": 2, "ferri_1cc_ccii": 1, "ferri_2cc_cccii": 2,
              "proposed_cccii": 1}
    for name, (pavg, ppk) in res.items():
        print(f"{name:20} {counts[name]:>9} {pavg:12.4e} {ppk:12.4e}")

    avg = {k: v[0] for k, v in res.items()}
    print("\norderings:")
    print(f"  two-conveyor > one-conveyor (plain):      "
          f"{avg['ferri_2cc_ccii']:.3e} > {avg['ferri_1cc_ccii']:.3e}")
    print(f"  two-conveyor > one-conveyor (controlled): "
          f"{avg['ferri_2cc_cccii']:.3e} > {avg['proposed_cccii']:.3e}")
    print(f"  controlled > plain at each count:         "
          f"{avg['proposed_cccii']:.3e} > {avg['ferri_1cc_ccii']:.3e}")


if __name__ == "__main__":
    main()
