"""Snowflake and grid-distortion trends for a few (p, q) pairs, printed as a table.

Shows the lower bound on the Lipschitz constant of a theta-snowflake growing in n
for theta above q/p and flattening at theta = q/p.
"""
from __future__ import annotations

import argparse

from discrete_xp import geometry as geo


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", default="4:3,6:4,8:3", help="comma list of p:q")
    ap.add_argument("--log2n", default="6,10,14,18")
    args = ap.parse_args()
    ns = [2 ** int(e) for e in args.log2n.split(",")]
    for pair in args.pairs.split(","):
        p, q = (int(x) for x in pair.split(":"))
        crit = float(geo.critical_snowflake_exponent(p, q))
        print(f"p={p} q={q}: n-exponent {geo.n_exponent(p, q)}, m-exponent {geo.m_exponent(p, q)}, "
              f"threshold exponent {geo.threshold_exponent(p, q)}, critical theta {crit:.4f}")
        for theta in sorted({crit, (crit + 1) / 2, 1.0}):
            vals = [geo.snowflake_bound(p, q, theta, n).value for n in ns]
            print(f"   theta={theta:.4f}: " + "  ".join(f"{v:8.4f}" for v in vals))
        vals = [geo.phase_transition_threshold(p, q, n) for n in ns]
        print("   phase threshold: " + "  ".join(f"{v:8.3f}" for v in vals))


if __name__ == "__main__":
    main()
