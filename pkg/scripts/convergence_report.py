"""Sup-norm distance to the social optimum over time for each dynamic on the default scenario."""

import argparse
import csv
from pathlib import Path

import numpy as np

from drmech.dynamics import KINDS, DynamicsConfig, initial_state, integrate
from drmech.equilibrium import social_optimum
from drmech.scenario_io import default_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/convergence.csv"))
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sc = default_scenario()
    mu = social_optimum(sc).q
    x0 = initial_state(sc, seed=args.seed)
    dist = {}
    for kind in KINDS:
        tr = integrate(sc, DynamicsConfig(kind=kind, eta=args.eta, t_end=args.t_end, record_every=1000), x0)
        dist[kind] = np.abs(tr.states[:, :, :-1] - mu).max(axis=(1, 2))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *KINDS])
        for j, t in enumerate(tr.times):
            w.writerow([repr(float(t)), *(repr(float(dist[k][j])) for k in KINDS)])
    for k in KINDS:
        print(f"{k:10s} distance at t={args.t_end:g}: {dist[k][-1]:.3e}")


if __name__ == "__main__":
    main()
