"""Optional SVG charts drawn from the same data the CSVs hold."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed salt and no date keep the SVG bytes reproducible
matplotlib.rcParams["svg.hashsalt"] = "drmech"
_META = {"Date": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def sweep_svg(path, rows):
    fig, ax = plt.subplots(1, 2, figsize=(8, 3))
    n = [r.n for r in rows]
    ax[0].semilogx(n, [r.demand_ratio for r in rows], "o-")
    ax[0].axhline(0.5, color="grey", lw=0.8, ls="--")
    ax[0].set(xlabel="N", ylabel="optimal / Nash demand at peak")
    ax[1].semilogx(n, [r.surplus_ratio for r in rows], "o-")
    ax[1].set(xlabel="N", ylabel="optimal / Nash surplus")
    _save(fig, path)


def simulation_svg(out_dir, trajectories, acc):
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(5, 3))
    for kind, tr in trajectories.items():
        ax.plot(tr.times, tr.total_demand, label=kind)
    ax.set(xlabel="t", ylabel="total demand")
    ax.legend()
    _save(fig, out_dir / "demand.svg")

    fig, ax = plt.subplots(figsize=(5, 3))
    for kind, phi in acc.cumulative.items():
        ax.plot(acc.times, phi, label=kind)
    ax.set(xlabel="t", ylabel="accumulated incentives")
    ax.legend()
    _save(fig, out_dir / "cumulative_incentives.svg")
