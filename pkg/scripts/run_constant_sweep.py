"""Chaos X_p constant sweep over n for several p; writes one CSV per p.

Example:  python scripts/run_constant_sweep.py --p 3,4,6 --n 4..10 --rule half --out results/
"""
from __future__ import annotations

import argparse
from pathlib import Path

from discrete_xp import search
from discrete_xp.cli import parse_range


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--p", default="3,4")
    ap.add_argument("--n", default="4..10:2")
    ap.add_argument("--rule", choices=("half", "sqrt"), default="half")
    ap.add_argument("--objective", choices=("chaos", "linear"), default="chaos")
    ap.add_argument("--restarts", type=int, default=2)
    ap.add_argument("--iterations", type=int, default=10)
    ap.add_argument("--coords-per-iteration", type=int, default=512)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()

    cfg = search.SearchConfig(
        restarts=args.restarts, iterations=args.iterations, seed=args.seed,
        coords_per_iteration=args.coords_per_iteration,
        constraint="mean_zero" if args.objective == "chaos" else "none",
    )
    args.out.mkdir(parents=True, exist_ok=True)
    for p in parse_range(args.p):
        table = search.constant_sweep(parse_range(args.n), args.rule, float(p), cfg, objective=args.objective)
        path = args.out / f"sweep_{args.objective}_{args.rule}_p{p}.csv"
        path.write_text(search.sweep_to_csv(table, args.rule))
        trend = ", ".join(f"n={r.n}: {r.best_ratio:.4f}" for r in table)
        print(f"p={p}  {trend}  -> {path}")


if __name__ == "__main__":
    main()
