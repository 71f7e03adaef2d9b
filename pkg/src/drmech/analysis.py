"""Headline metrics: peak-to-average ratios, N-sweeps and accumulated incentives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .dynamics import Trajectory
from .equilibrium import nash_equilibrium, social_optimum
from .market import DomainError, Scenario, aggregate_surplus
from .scenario_io import replicate


def par(totals) -> float:
    """Peak-to-average ratio ``T * max / sum`` of per-period totals."""
    totals = np.asarray(totals, float)
    if totals.ndim != 1 or totals.size == 0:
        raise DomainError("need a nonempty vector of period totals")
    if np.any(totals < 0):
        raise DomainError("period totals must be nonnegative")
    s = totals.sum()
    if not s > 0:
        raise DomainError("PAR undefined for an all-zero profile")
    return float(totals.size * totals.max() / s)


@dataclass(frozen=True)
class ParReport:
    par_optimal: float
    par_suboptimal: float
    peak_optimal: int
    peak_suboptimal: int
    phi: np.ndarray  # per-period ||xi^k|| / ||mu^k||

    @property
    def ratio(self) -> float:
        return self.par_suboptimal / self.par_optimal

    @property
    def peaks_coincide(self) -> bool:
        return self.peak_optimal == self.peak_suboptimal

    @property
    def bound(self) -> float:
        """``phi`` at the peak over its minimum; caps the ratio when the peaks coincide."""
        return float(self.phi[self.peak_optimal] / self.phi.min())


def par_ratio(scenario: Scenario) -> ParReport:
    if scenario.n_periods < 2:
        raise DomainError("PAR ratio needs at least two periods")
    mu = social_optimum(scenario).totals()
    xi = nash_equilibrium(scenario).totals()
    return ParReport(
        par_optimal=par(mu),
        par_suboptimal=par(xi),
        # argmax breaks ties by lowest index
        peak_optimal=int(np.argmax(mu)),
        peak_suboptimal=int(np.argmax(xi)),
        phi=xi / mu,
    )


@dataclass(frozen=True)
class SweepRow:
    n: int
    demand_ratio: float
    surplus_ratio: float
    peak_period: int


def ratio_sweep(base: Scenario, n_values) -> list[SweepRow]:
    """Optimal/Nash demand at the peak period and surplus ratio as consumers are added.

    Populations of size ``n`` cycle through the rows of ``base``.
    """
    rows = []
    for n in n_values:
        if n < 1:
            raise ValueError("N values must be positive")
        sc = replicate(base, int(n))
        mu = social_optimum(sc)
        xi = nash_equilibrium(sc)
        kp = int(np.argmax(mu.totals()))
        rows.append(
            SweepRow(
                n=int(n),
                demand_ratio=float(mu.totals()[kp] / xi.totals()[kp]),
                surplus_ratio=aggregate_surplus(sc, mu.profile) / aggregate_surplus(sc, xi.profile),
                peak_period=kp,
            )
        )
    return rows


@dataclass(frozen=True)
class IncentiveAccumulation:
    """Instantaneous incentives ``I_d(t)``, their integrals ``Phi_d(t)`` and end-time shares."""

    times: np.ndarray
    instant: dict
    cumulative: dict
    shares: dict

    def ranking(self) -> list[str]:
        """Dynamics ordered from the smallest to the largest accumulated incentive."""
        return sorted(self.shares, key=lambda d: (self.shares[d], d))


def accumulate_incentives(trajectories: dict[str, Trajectory]) -> IncentiveAccumulation:
    if not trajectories:
        raise ValueError("need at least one trajectory")
    names = list(trajectories)
    times = np.asarray(trajectories[names[0]].times)
    for d in names[1:]:
        other = np.asarray(trajectories[d].times)
        if other.shape != times.shape or not np.allclose(other, times, rtol=0, atol=1e-12):
            raise ValueError(f"trajectory {d!r} is on a different time grid")
    instant = {d: np.asarray(trajectories[d].incentives, float) for d in names}
    cumulative = {d: cumulative_trapezoid(instant[d], times, initial=0.0) for d in names}
    ends = np.array([cumulative[d][-1] for d in names])
    total = ends.sum()
    if total == 0:
        shares = {d: 1.0 / len(names) for d in names}
    else:
        shares = {d: float(e / total) for d, e in zip(names, ends)}
    return IncentiveAccumulation(times, instant, cumulative, shares)


def write_sweep_csv(path, rows) -> int:
    with open(path, "w", newline="") as fh:
        fh.write("n,demand_ratio,surplus_ratio,peak_period\n")
        for r in rows:
            fh.write(f"{r.n},{r.demand_ratio:.15g},{r.surplus_ratio:.15g},{r.peak_period + 1}\n")
    return len(rows)


def write_par_csv(path, reports) -> int:
    """One row per ``(lower_bound, ParReport)`` pair; a bound of ``None`` is written as 0."""
    with open(path, "w", newline="") as fh:
        fh.write("lower_bound,par_optimal,par_suboptimal,ratio,peak_optimal,peak_suboptimal,bound\n")
        for lb, r in reports:
            fh.write(
                f"{0.0 if lb is None else lb:.15g},{r.par_optimal:.15g},{r.par_suboptimal:.15g},"
                f"{r.ratio:.15g},{r.peak_optimal + 1},{r.peak_suboptimal + 1},{r.bound:.15g}\n"
            )
    return len(reports)


def write_accumulation_csv(path, acc: IncentiveAccumulation) -> int:
    """Long format ``t,dynamic,instant,cumulative``."""
    rows = 0
    with open(path, "w", newline="") as fh:
        fh.write("t,dynamic,instant,cumulative\n")
        for d in acc.instant:
            for t, a, c in zip(acc.times, acc.instant[d], acc.cumulative[d]):
                fh.write(f"{t:.6g},{d},{a:.15g},{c:.15g}\n")
                rows += 1
    return rows


def write_shares_csv(path, acc: IncentiveAccumulation) -> int:
    with open(path, "w", newline="") as fh:
        fh.write("dynamic,accumulated,share\n")
        for d in acc.shares:
            fh.write(f"{d},{acc.cumulative[d][-1]:.15g},{acc.shares[d]:.15g}\n")
    return len(acc.shares)
