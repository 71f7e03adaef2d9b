"""PAR ratio of Nash to optimum as a uniform lower bound moves across the optimal-total band."""

import argparse
from pathlib import Path

import numpy as np

from drmech.analysis import par_ratio, write_par_csv
from drmech.equilibrium import social_optimum
from drmech.scenario_io import default_scenario, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", type=Path)
    ap.add_argument("--out", type=Path, default=Path("results/lower_bound"))
    ap.add_argument("--points", type=int, default=11)
    args = ap.parse_args()
    sc = load_scenario(args.scenario) if args.scenario else default_scenario()
    per_consumer = social_optimum(sc).totals() / sc.n_consumers
    bounds = np.linspace(0.0, per_consumer.max(), args.points)
    reports = [(None, par_ratio(sc))] + [(float(m), par_ratio(sc.with_bounds(lower=float(m)))) for m in bounds[1:]]
    args.out.mkdir(parents=True, exist_ok=True)
    write_par_csv(args.out / "par.csv", reports)
    print(f"band per consumer: [{per_consumer.min():.4f}, {per_consumer.max():.4f}]")
    for m, rep in reports:
        print(f"m={m or 0.0:.4f}  PAR mu {rep.par_optimal:.4f}  PAR xi {rep.par_suboptimal:.4f}  ratio {rep.ratio:.4f}")


if __name__ == "__main__":
    main()
