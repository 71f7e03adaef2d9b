"""Economic primitives of the demand-response market.

Consumers value energy with ``alpha * log(1 + q)`` and pay the average-cost
price ``p(z) = beta * z + b`` of the period's total demand.  Every quantity is
per period; a scenario holds ``T`` independent periods.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Raised when a primitive is evaluated outside its domain."""


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None:
        arr = np.broadcast_to(arr, shape).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PriceModel:
    """Affine average-cost price ``p(z) = beta*z + b``; generation cost is ``z*p(z)``."""

    beta: float
    b: float = 0.0

    def price(self, total):
        return self.beta * total + self.b

    def slope(self, total=None):
        """Derivative of the unit price; constant for the affine model."""
        return self.beta

    def cost(self, total):
        return total * self.price(total)


@dataclass(frozen=True, eq=False)
class ValuationParams:
    """Per-consumer, per-period weights of the log valuation ``alpha*log(1+q)``."""

    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(np.atleast_2d(self.alpha)))

    def __eq__(self, other):
        return isinstance(other, ValuationParams) and np.array_equal(self.alpha, other.alpha)

    __hash__ = None

    @property
    def shape(self):
        return self.alpha.shape

    def value(self, alpha, q):
        return alpha * np.log1p(q)

    def marginal(self, alpha, q):
        return alpha / (1.0 + q)

    def solve_marginal(self, alpha, c0, c1):
        """Solve ``v'(q) = c0 + c1*q`` for ``q`` (vectorised).

        The left side decreases and the right side is nondecreasing, so the
        root is unique.  Returns a negative number when ``v'(0) < c0``; callers
        clamp to their feasible box.  For the log family the equation is the
        quadratic ``c1 q^2 + (c0 + c1) q + (c0 - alpha) = 0``; the root is taken
        in the cancellation-free form.
        """
        alpha, c0, c1 = np.broadcast_arrays(
            np.asarray(alpha, float), np.asarray(c0, float), np.asarray(c1, float)
        )
        lin = c0 + c1
        # discriminant equals (c0 - c1)^2 + 4 c1 alpha >= 0
        disc = np.sqrt(lin * lin + 4.0 * c1 * (alpha - c0))
        with np.errstate(divide="ignore"):
            return 2.0 * (alpha - c0) / (lin + disc)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A full problem instance.

    ``lower_bounds``/``upper_bounds`` are per-consumer per-period box
    constraints (N x T); ``None`` means ``[0, inf)``.  ``capacity`` is the
    daily energy budget ``Q_i`` used by the population dynamics.
    """

    valuations: ValuationParams
    price: PriceModel
    capacity: np.ndarray
    lower_bounds: np.ndarray | None = None
    upper_bounds: np.ndarray | None = None
    n_consumers: int = field(init=False)
    n_periods: int = field(init=False)

    def __post_init__(self):
        n, t = self.valuations.shape
        object.__setattr__(self, "n_consumers", n)
        object.__setattr__(self, "n_periods", t)
        object.__setattr__(self, "capacity", _frozen(self.capacity, (n,)))
        for name in ("lower_bounds", "upper_bounds"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, float)
                if val.ndim == 1:
                    val = val[:, None]
                object.__setattr__(self, name, _frozen(val, (n, t)))

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b)

        return (
            self.valuations == other.valuations
            and self.price == other.price
            and np.array_equal(self.capacity, other.capacity)
            and same(self.lower_bounds, other.lower_bounds)
            and same(self.upper_bounds, other.upper_bounds)
        )

    __hash__ = None

    @property
    def alpha(self) -> np.ndarray:
        return self.valuations.alpha

    def lower(self) -> np.ndarray:
        if self.lower_bounds is None:
            return np.zeros((self.n_consumers, self.n_periods))
        return np.asarray(self.lower_bounds)

    def upper(self) -> np.ndarray:
        if self.upper_bounds is None:
            return np.full((self.n_consumers, self.n_periods), np.inf)
        return np.asarray(self.upper_bounds)

    def with_bounds(self, lower=None, upper=None) -> "Scenario":
        return Scenario(self.valuations, self.price, self.capacity, lower, upper)


@dataclass(frozen=True, eq=False)
class DemandProfile:
    """Consumption matrix ``q`` with one row per consumer and one column per period."""

    q: np.ndarray

    def __post_init__(self):
        q = _frozen(np.atleast_2d(self.q))
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise DomainError("demand must be finite and nonnegative")
        object.__setattr__(self, "q", q)

    def __eq__(self, other):
        return isinstance(other, DemandProfile) and np.array_equal(self.q, other.q)

    __hash__ = None

    def totals(self) -> np.ndarray:
        """Per-period aggregate demand ``||q^k||_1``."""
        return self.q.sum(axis=0)


def price(model: PriceModel, total: float) -> float:
    if total < 0:
        raise DomainError(f"total demand must be nonnegative, got {total}")
    return float(model.price(total))


def cost(model: PriceModel, total: float) -> float:
    if total < 0:
        raise DomainError(f"total demand must be nonnegative, got {total}")
    return float(model.cost(total))


def valuation(params: ValuationParams, i: int, k: int, q: float) -> float:
    if q < 0:
        raise DomainError(f"consumption must be nonnegative, got {q}")
    return float(params.value(params.alpha[i, k], q))


def marginal_valuation(params: ValuationParams, i: int, k: int, q: float) -> float:
    if q < 0:
        raise DomainError(f"consumption must be nonnegative, got {q}")
    return float(params.marginal(params.alpha[i, k], q))


def _check_column(scenario: Scenario, q_col) -> np.ndarray:
    q_col = np.asarray(q_col, dtype=float)
    if q_col.shape != (scenario.n_consumers,):
        raise DomainError(f"expected {scenario.n_consumers} consumptions, got shape {q_col.shape}")
    if np.any(q_col < 0):
        raise DomainError("consumption must be nonnegative")
    return q_col


def surplus_U(scenario: Scenario, i: int, k: int, q_col) -> float:
    """Surplus of consumer ``i`` in period ``k``: valuation minus payment at the average-cost price."""
    q_col = _check_column(scenario, q_col)
    if not (0 <= i < scenario.n_consumers and 0 <= k < scenario.n_periods):
        raise IndexError(f"consumer {i} / period {k} out of range")
    v = scenario.valuations.value(scenario.alpha[i, k], q_col[i])
    return float(v - q_col[i] * scenario.price.price(q_col.sum()))


def surplus_matrix(scenario: Scenario, q: np.ndarray) -> np.ndarray:
    """All ``U_i^k`` at once (N x T)."""
    q = np.asarray(q, float)
    totals = q.sum(axis=0)
    return scenario.valuations.value(scenario.alpha, q) - q * scenario.price.price(totals)


def aggregate_surplus(scenario: Scenario, profile: DemandProfile | np.ndarray) -> float:
    q = profile.q if isinstance(profile, DemandProfile) else np.asarray(profile, float)
    if q.shape != (scenario.n_consumers, scenario.n_periods):
        raise DomainError(f"profile shape {q.shape} does not match scenario")
    return float(surplus_matrix(scenario, q).sum())


def validate_scenario(scenario: Scenario) -> list[str]:
    """Return human-readable violations; an empty list means the scenario is usable."""
    out = []
    n, t = scenario.n_consumers, scenario.n_periods
    if n < 1 or t < 1:
        out.append("need at least one consumer and one period")
    if not np.isfinite(scenario.price.beta) or scenario.price.beta <= 0:
        out.append("beta must be positive")
    if not np.isfinite(scenario.price.b) or scenario.price.b < 0:
        out.append("b must be nonnegative")
    alpha = scenario.alpha
    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
        out.append("alpha must be positive")
    cap = scenario.capacity
    if not np.all(np.isfinite(cap)) or np.any(cap <= 0):
        out.append("capacity must be positive")
    lo, hi = scenario.lower(), scenario.upper()
    if np.any(lo < 0):
        out.append("lower bounds must be nonnegative")
    if np.any(lo > hi):
        out.append("lower bounds must not exceed upper bounds")
    if scenario.upper_bounds is not None and np.any(hi > cap[:, None]):
        out.append("upper bounds must not exceed capacity")
    # marginal valuation at zero must beat the price intercept
    bad = np.argwhere(scenario.valuations.marginal(alpha, 0.0) < scenario.price.b)
    if bad.size:
        i, k = bad[0]
        out.append(
            f"assumption B violated at q=0: marginal valuation {alpha[i, k]:g} "
            f"< price intercept {scenario.price.b:g} (consumer {i + 1}, period {k + 1})"
        )
    return out


def is_heterogeneous(alpha: np.ndarray) -> bool:
    """True when valuations strictly increase across consumers in every period."""
    alpha = np.asarray(alpha)
    return alpha.shape[0] < 2 or bool(np.all(np.diff(alpha, axis=0) > 0))
