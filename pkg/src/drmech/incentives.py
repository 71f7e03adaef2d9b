"""Externality-based incentive payments and their diagnostics.

Consumer ``i`` receives ``||q_-i|| * (h_i - p(||q||))`` where ``h_i`` is the
price the others would face if ``i`` were replaced by a proxy consumer.  The
proxy used by default consumes the others' mean demand, which makes the
payments fair; :func:`incentive_general` allows any linear proxy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .equilibrium import OPTIMUM, foc_residual
from .market import DemandProfile, DomainError, Scenario, _check_column, surplus_matrix

FAIRNESS_TOL = 1e-12


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class OmegaWeights:
    """Weights of the linear proxy ``f(q_-i) = sum_{j != i} omega_j q_j``."""

    omega: np.ndarray

    def __post_init__(self):
        w = np.array(self.omega, dtype=float)
        if not np.all(np.isfinite(w)):
            raise DomainError("omega must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)

    @classmethod
    def uniform(cls, n: int) -> "OmegaWeights":
        return cls(np.full(n, 1.0 / (n - 1)))


@dataclass(frozen=True)
class IncentiveReport:
    """Incentives, surpluses and fairness flags of one profile.

    Matrices are N x T; ``fairness_ok`` holds the three fairness conditions
    per period (T x 3).
    """

    incentives: np.ndarray
    surplus_u: np.ndarray
    surplus_w: np.ndarray
    fairness_ok: np.ndarray

    @property
    def per_consumer(self) -> np.ndarray:
        """Daily incentive of each consumer (summed over periods)."""
        return self.incentives.sum(axis=1)

    @property
    def total(self) -> float:
        return float(self.incentives.sum())

    @property
    def individual_rationality(self) -> np.ndarray:
        return self.surplus_w.sum(axis=1)


def _require_pair(scenario: Scenario):
    if scenario.n_consumers < 2:
        raise DomainError("the incentive mechanism needs at least two consumers")


def incentive_column(scenario: Scenario, q_col) -> np.ndarray:
    """Incentives of every consumer for one period's demand vector."""
    _require_pair(scenario)
    q_col = np.asarray(q_col, float)
    n = scenario.n_consumers
    pm = scenario.price
    others = q_col.sum(axis=0) - q_col
    return others * (pm.price(n / (n - 1) * others) - pm.price(q_col.sum(axis=0)))


def incentive_matrix(scenario: Scenario, q) -> np.ndarray:
    """N x T incentives; works column-wise, so ``q`` may carry extra trailing axes."""
    return incentive_column(scenario, q)


def incentive(scenario: Scenario, i: int, k: int, q_col) -> float:
    q_col = _check_column(scenario, q_col)
    return float(incentive_column(scenario, q_col)[i])


def incentive_general(scenario: Scenario, weights: OmegaWeights, i: int, k: int, q_col) -> float:
    """Incentive with the proxy ``h_i = p(||q_-i|| + sum_{j != i} omega_j q_j)``."""
    _require_pair(scenario)
    q_col = _check_column(scenario, q_col)
    w = np.asarray(weights.omega)
    if w.shape != q_col.shape:
        raise DomainError("omega must have one weight per consumer")
    pm = scenario.price
    others = q_col.sum() - q_col[i]
    proxy = float(w @ q_col - w[i] * q_col[i])
    return float(others * (pm.price(others + proxy) - pm.price(q_col.sum())))


def general_totals(scenario: Scenario, weights: OmegaWeights, q: np.ndarray) -> np.ndarray:
    """Sum of general incentives for each column of ``q`` (N x M)."""
    q = np.asarray(q, float)
    w = np.asarray(weights.omega)[:, None]
    pm = scenario.price
    totals = q.sum(axis=0)
    others = totals - q
    proxy = (w * q).sum(axis=0) - w * q
    return (others * (pm.price(others + proxy) - pm.price(totals))).sum(axis=0)


def surplus_W(scenario: Scenario, i: int, k: int, q_col) -> float:
    """Surplus with incentives: ``v_i(q_i) - ||q|| p(||q||) + ||q_-i|| p(N/(N-1) ||q_-i||)``."""
    _require_pair(scenario)
    q_col = _check_column(scenario, q_col)
    n = scenario.n_consumers
    pm = scenario.price
    total = q_col.sum()
    others = total - q_col[i]
    v = scenario.valuations.value(scenario.alpha[i, k], q_col[i])
    return float(v - total * pm.price(total) + others * pm.price(n / (n - 1) * others))


def budget_total(scenario: Scenario, k: int, q_col) -> float:
    """Net incentive outlay for one period, by direct summation."""
    q_col = _check_column(scenario, q_col)
    _require_pair(scenario)
    return float(incentive_column(scenario, q_col).sum())


def budget_quadratic(scenario: Scenario, q_col) -> float:
    """The same outlay through the quadratic form ``beta q^T A q``."""
    _require_pair(scenario)
    q_col = np.asarray(q_col, float)
    n = scenario.n_consumers
    a = -np.ones((n, n)) / (n - 1) + n / (n - 1) * np.eye(n)
    return float(scenario.price.beta * q_col @ a @ q_col)


def _fairness(inc: np.ndarray, q_col: np.ndarray, tol: float) -> tuple[bool, bool, bool]:
    scale = max(1.0, float(np.max(np.abs(inc))))
    eq_q = np.isclose(q_col[:, None], q_col[None, :], rtol=0, atol=tol)
    d_inc = inc[:, None] - inc[None, :]
    equal_ok = bool(np.all(np.abs(d_inc[eq_q]) <= tol * scale))
    if np.all(eq_q):
        zero_ok = bool(np.all(np.abs(inc) <= tol * scale))
    else:
        zero_ok = True
    # q_j > q_i  =>  I_j < I_i
    more = q_col[None, :] > q_col[:, None] + tol
    mono_ok = bool(np.all(d_inc[more] > 0))
    return equal_ok, zero_ok, mono_ok


def fairness_check(scenario: Scenario, k: int, q_col, tol: float = FAIRNESS_TOL) -> tuple[bool, bool, bool]:
    """Check the three fairness conditions on a single period's demand vector.

    Returns flags for (equal demand gets equal incentive, uniform demand gets
    zero incentive, higher demand gets strictly lower incentive).  Conditions
    whose premise never occurs in the profile are vacuously true.
    """
    q_col = _check_column(scenario, q_col)
    return _fairness(incentive_column(scenario, q_col), q_col, tol)


def budget_imbalance_probe(scenario: Scenario, weights: OmegaWeights, sample_profiles) -> float:
    """Largest absolute net outlay over a set of demand vectors (rows)."""
    samples = np.asarray(sample_profiles, float)
    if samples.size == 0:
        raise ValueError("need at least one sample profile")
    samples = np.atleast_2d(samples)
    if samples.shape[1] != scenario.n_consumers:
        raise DomainError("sample profiles must have one entry per consumer")
    _require_pair(scenario)
    spread = np.ptp(samples, axis=1)
    if np.all(spread == 0):
        warnings.warn("all sample profiles are homogeneous; the probe is degenerate", RuntimeWarning)
    return float(np.max(np.abs(general_totals(scenario, weights, samples.T))))


def probe_samples(scenario: Scenario, n_random: int = 1000, rng=None) -> np.ndarray:
    """Uniform random demand vectors in ``[0, Q]^N`` plus corner profiles."""
    rng = np.random.default_rng(rng)
    n = scenario.n_consumers
    cap = np.asarray(scenario.capacity)
    rand = rng.uniform(0.0, 1.0, size=(n_random, n)) * cap
    corners = [cap * np.eye(n)[i] for i in range(n)]
    corners.append(cap.copy())
    corners.append(cap * (np.arange(n) % 2))
    return np.vstack([rand, np.array(corners)])


def incentive_report(scenario: Scenario, profile) -> IncentiveReport:
    _require_pair(scenario)
    q = profile.q if isinstance(profile, DemandProfile) else np.asarray(profile, float)
    inc = incentive_matrix(scenario, q)
    u = surplus_matrix(scenario, q)
    fair = np.array([_fairness(inc[:, k], q[:, k], FAIRNESS_TOL) for k in range(q.shape[1])], dtype=bool)
    return IncentiveReport(inc, u, u + inc, fair)


@dataclass(frozen=True)
class RationalityReport:
    """Surplus with and without incentives at the optimum (N x T matrices)."""

    surplus_u: np.ndarray
    surplus_w: np.ndarray
    below_average: np.ndarray
    rational: np.ndarray
    benefit_matches: np.ndarray

    @property
    def all_rational(self) -> bool:
        return bool(np.all(self.rational))

    @property
    def all_benefit_matches(self) -> bool:
        return bool(np.all(self.benefit_matches))


def rationality_and_benefit(scenario: Scenario, mu, tol: float = 1e-7) -> RationalityReport:
    """Check participation and who gains from the mechanism at the social optimum.

    Raises :class:`PreconditionError` when ``mu`` is not an optimum.
    """
    _require_pair(scenario)
    q = mu.q if hasattr(mu, "q") else np.asarray(mu, float)
    res = float(np.max(np.abs(foc_residual(scenario, q, OPTIMUM))))
    if res > tol:
        raise PreconditionError(f"profile is not the social optimum (residual {res:.3e})")
    u = surplus_matrix(scenario, q)
    w = u + incentive_matrix(scenario, q)
    n = scenario.n_consumers
    totals = q.sum(axis=0)
    below = totals - n * q > 1e-12 * np.maximum(totals, 1.0)
    gains = w - u > 1e-12 * np.maximum(np.abs(u), 1.0)
    return RationalityReport(u, w, below, w >= -1e-9, gains == below)


def write_csv(path, scenario: Scenario, report: IncentiveReport) -> int:
    """Rows ``consumer,period,I,U,W``; returns the row count."""
    rows = 0
    with open(path, "w", newline="") as fh:
        fh.write("consumer,period,I,U,W\n")
        for i in range(scenario.n_consumers):
            for k in range(scenario.n_periods):
                fh.write(
                    f"{i + 1},{k + 1},{report.incentives[i, k]:.15g},"
                    f"{report.surplus_u[i, k]:.15g},{report.surplus_w[i, k]:.15g}\n"
                )
                rows += 1
    return rows
