"""Optimal-to-Nash demand ratio as the population grows (default ladder replicated)."""

import argparse
from pathlib import Path

from drmech.analysis import ratio_sweep, write_sweep_csv
from drmech.scenario_io import default_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/sweep"))
    ap.add_argument("--n", type=int, nargs="+", default=[1, 2, 5, 10, 20, 50, 100])
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rows = ratio_sweep(default_scenario(), args.n)
    write_sweep_csv(args.out / "sweep.csv", rows)
    for r in rows:
        print(f"N={r.n:4d}  demand ratio {r.demand_ratio:.4f}  bound {(r.n + 1) / (2 * r.n):.4f}  surplus ratio {r.surplus_ratio:.4f}")
    if args.svg:
        from drmech.plots import sweep_svg

        sweep_svg(args.out / "sweep.svg", rows)


if __name__ == "__main__":
    main()
