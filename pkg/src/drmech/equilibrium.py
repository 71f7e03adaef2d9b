"""Social optimum and Nash equilibria of the per-period consumption game.

Both solution concepts are aggregative: for a fixed period total ``S`` each
consumer's first-order condition pins down its own demand, so the profile is
found by a scalar root search on ``sum_i q_i(S) = S``.  The game with
incentives is instead solved by iterated best responses, which gives an
independent route to the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import DemandProfile, DomainError, Scenario

OPTIMUM = "optimum"
NASH = "nash"
NASH_INCENTIVES = "nash_with_incentives"
KINDS = (OPTIMUM, NASH, NASH_INCENTIVES)

TOL = 1e-9
MAX_ITER = 10_000


class SolverError(RuntimeError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class EquilibriumResult:
    profile: DemandProfile
    kind: str
    residual: float
    iterations: int

    @property
    def q(self) -> np.ndarray:
        return self.profile.q

    def totals(self) -> np.ndarray:
        return self.profile.totals()


def _periods(scenario: Scenario, k):
    if k is None:
        return np.arange(scenario.n_periods)
    ks = np.atleast_1d(np.asarray(k, dtype=int))
    if np.any((ks < 0) | (ks >= scenario.n_periods)):
        raise IndexError(f"period {k} out of range")
    return ks


def _demand_at_total(scenario: Scenario, kind: str, totals: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """Each consumer's FOC solution given period totals, clamped to the box."""
    pm = scenario.price
    alpha = scenario.alpha[:, ks]
    p, dp = pm.price(totals), pm.slope(totals)
    if kind == NASH:
        # v'(q) = p(S) + q p'(S)
        q = scenario.valuations.solve_marginal(alpha, p, dp)
    else:
        # v'(q) = p(S) + S p'(S)
        q = scenario.valuations.solve_marginal(alpha, p + totals * dp, 0.0)
    return np.clip(q, scenario.lower()[:, ks], scenario.upper()[:, ks])


def _solve_aggregate(scenario: Scenario, kind: str, ks: np.ndarray) -> tuple[np.ndarray, int]:
    lo = scenario.lower()[:, ks].sum(axis=0)
    hi = np.maximum(lo, 1.0)

    def excess(s):
        return _demand_at_total(scenario, kind, s, ks).sum(axis=0) - s

    # excess is strictly decreasing in the total; grow the bracket until it turns negative
    for _ in range(200):
        g = excess(hi)
        if np.all(g <= 0):
            break
        hi = np.where(g > 0, 2.0 * hi, hi)
    else:
        raise SolverError("could not bracket the aggregate demand")

    it = 0
    while it < 400:
        it += 1
        mid = 0.5 * (lo + hi)
        g = excess(mid)
        lo = np.where(g > 0, mid, lo)
        hi = np.where(g > 0, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(hi, 1e-300)):
            break
    s = 0.5 * (lo + hi)
    return _demand_at_total(scenario, kind, s, ks), it


def foc_residual(scenario: Scenario, profile, kind: str) -> np.ndarray:
    """Per-entry first-order residual (N x T) for the given solution concept.

    Entries sitting on an active bound are zeroed when the raw residual points
    out of the box (KKT complementarity).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    q = profile.q if isinstance(profile, DemandProfile) else np.asarray(profile, float)
    pm = scenario.price
    totals = q.sum(axis=0)
    own = q if kind == NASH else np.broadcast_to(totals, q.shape)
    r = scenario.valuations.marginal(scenario.alpha, q) - pm.price(totals) - own * pm.slope(totals)
    lo, hi = scenario.lower(), scenario.upper()
    at_lo = (q <= lo + 1e-12) & (r < 0)
    at_hi = (q >= hi - 1e-12) & (r > 0)
    return np.where(at_lo | at_hi, 0.0, r)


def _embed(scenario, ks, q_sub):
    """Place period-subset results into a full N x T profile (other periods zero)."""
    if len(ks) == scenario.n_periods:
        return q_sub
    full = np.zeros((scenario.n_consumers, scenario.n_periods))
    full[:, ks] = q_sub
    return full


def _residual_on(scenario, q_full, kind, ks):
    return float(np.max(np.abs(foc_residual(scenario, q_full, kind)[:, ks])))


def social_optimum(scenario: Scenario, k=None, tol: float = TOL) -> EquilibriumResult:
    """Demand maximising aggregate surplus in period ``k`` (all periods when ``k`` is None).

    With a single period selected the returned profile is zero outside it.
    """
    ks = _periods(scenario, k)
    q, it = _solve_aggregate(scenario, OPTIMUM, ks)
    full = _embed(scenario, ks, q)
    res = _residual_on(scenario, full, OPTIMUM, ks)
    if not np.isfinite(res) or res > tol:
        raise SolverError("optimum solve did not reach tolerance", res, it)
    return EquilibriumResult(DemandProfile(full), OPTIMUM, res, it)


def best_response(
    scenario: Scenario, i: int, k: int, others_total: float, with_incentives: bool = False
) -> float:
    """Consumer ``i``'s surplus-maximising demand in period ``k`` given the others' total."""
    if others_total < 0:
        raise DomainError("others_total must be nonnegative")
    return float(_best_response_vec(scenario, i, _periods(scenario, k), np.asarray([others_total]), with_incentives)[0])


def _best_response_vec(scenario, i, ks, others, with_incentives):
    pm = scenario.price
    alpha = scenario.alpha[i, ks]
    # U_i: v'(q) = b + beta*s + 2*beta*q ; W_i: v'(q) = b + 2*beta*s + 2*beta*q
    lead = 2.0 if with_incentives else 1.0
    c0 = pm.b + lead * pm.beta * others
    q = scenario.valuations.solve_marginal(alpha, c0, 2.0 * pm.beta)
    return np.clip(q, scenario.lower()[i, ks], scenario.upper()[i, ks])


def _best_response_iteration(scenario, ks, with_incentives, tol, max_iter):
    """Gauss-Seidel sweeps of exact best responses, all periods in parallel."""
    q = scenario.lower()[:, ks].copy()
    totals = q.sum(axis=0)
    for it in range(1, max_iter + 1):
        change = 0.0
        for i in range(scenario.n_consumers):
            new = _best_response_vec(scenario, i, ks, totals - q[i], with_incentives)
            change = max(change, float(np.max(np.abs(new - q[i]))))
            totals = totals + new - q[i]
            q[i] = new
        if change <= 1e-13 * max(1.0, float(q.max(initial=0.0))):
            return q, it
    return q, max_iter


def nash_equilibrium(
    scenario: Scenario, k=None, with_incentives: bool = False, tol: float = TOL, max_iter: int = MAX_ITER
) -> EquilibriumResult:
    """Nash equilibrium of the consumption game, with or without the incentive payments."""
    ks = _periods(scenario, k)
    if with_incentives:
        if scenario.n_consumers < 2:
            raise DomainError("incentives need at least two consumers")
        q, it = _best_response_iteration(scenario, ks, True, tol, max_iter)
        kind = NASH_INCENTIVES
    else:
        q, it = _solve_aggregate(scenario, NASH, ks)
        kind = NASH
    full = _embed(scenario, ks, q)
    res = _residual_on(scenario, full, kind, ks)
    if not np.isfinite(res) or res > tol:
        raise SolverError(f"{kind} solve did not reach tolerance", res, it)
    return EquilibriumResult(DemandProfile(full), kind, res, it)


def solve(scenario: Scenario, kind: str) -> EquilibriumResult:
    if kind == OPTIMUM:
        return social_optimum(scenario)
    if kind == NASH:
        return nash_equilibrium(scenario)
    if kind == NASH_INCENTIVES:
        return nash_equilibrium(scenario, with_incentives=True)
    raise ValueError(f"unknown kind {kind!r}")


def write_csv(path, scenario: Scenario, results) -> int:
    """Write rows ``kind,consumer,period,q,residual`` (1-based indices); returns the row count."""
    rows = 0
    with open(path, "w", newline="") as fh:
        fh.write("kind,consumer,period,q,residual\n")
        for res in results:
            r = foc_residual(scenario, res.q, res.kind)
            for i in range(scenario.n_consumers):
                for k in range(scenario.n_periods):
                    fh.write(f"{res.kind},{i + 1},{k + 1},{res.q[i, k]:.15g},{r[i, k]:.6e}\n")
                    rows += 1
    return rows
