"""Evolutionary dynamics of the multi-population consumption game.

Consumer ``i`` is a population of mass ``Q_i`` spread over ``T + 1``
strategies: the ``T`` consumption periods plus a slack strategy holding the
unconsumed capacity.  A strategy's fitness is the marginal surplus of the
consumer in that period (zero for slack).  Four revision dynamics move the
state; all conserve each population's mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .incentives import incentive_matrix
from .market import Scenario, surplus_matrix

KINDS = ("logit", "replicator", "bnn", "smith")


class IntegrationError(RuntimeError):
    def __init__(self, message, last_time):
        super().__init__(f"{message} (last valid t={last_time:g})")
        self.last_time = last_time


@dataclass(frozen=True, eq=False)
class PopulationState:
    """N x (T+1) strategy masses; the last column is slack."""

    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def q(self) -> np.ndarray:
        return self.x[:, :-1]

    @property
    def slack(self) -> np.ndarray:
        return self.x[:, -1]

    def mass(self) -> np.ndarray:
        return self.x.sum(axis=1)

    def check(self, capacity, tol: float = 1e-6) -> list[str]:
        out = []
        if np.any(self.x < -1e-12):
            out.append("negative strategy mass")
        drift = np.max(np.abs(self.mass() - np.asarray(capacity)))
        if drift > tol:
            out.append(f"mass drift {drift:.3e}")
        return out

    @classmethod
    def from_demand(cls, scenario: Scenario, q) -> "PopulationState":
        q = np.asarray(q, float)
        slack = np.asarray(scenario.capacity) - q.sum(axis=1)
        if np.any(slack < -1e-9):
            raise ValueError("demand exceeds capacity")
        return cls(np.column_stack([q, np.maximum(slack, 0.0)]))


@dataclass(frozen=True)
class DynamicsConfig:
    """Settings of one integration run.

    With ``incentive_window=(t_on, t_off)`` incentives are paid only for
    ``t_on <= t < t_off``; otherwise ``incentives`` decides for the whole run.
    """

    kind: str = "smith"
    eta: float = 0.1
    dt: float = 1e-3
    t_end: float = 6.0
    incentive_window: tuple[float, float] | None = None
    record_every: int = 10
    incentives: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dynamics {self.kind!r}; choose from {KINDS}")
        if self.kind == "logit" and not self.eta > 0:
            raise ValueError("logit needs eta > 0")
        if not self.dt > 0 or not self.t_end > 0:
            raise ValueError("dt and t_end must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        if self.incentive_window is not None:
            t_on, t_off = self.incentive_window
            if not (t_on < t_off <= self.t_end):
                raise ValueError("incentive window needs t_on < t_off <= t_end")

    def active(self, t: float) -> bool:
        if self.incentive_window is None:
            return self.incentives
        t_on, t_off = self.incentive_window
        return t_on <= t < t_off


def fitness_matrix(scenario: Scenario, x: np.ndarray, incentives_active: bool = True) -> np.ndarray:
    """Fitness of every strategy (N x (T+1)); the slack column is zero."""
    q = x[:, :-1]
    pm = scenario.price
    totals = q.sum(axis=0)
    own = totals if incentives_active else q
    f = np.zeros_like(x)
    f[:, :-1] = scenario.valuations.marginal(scenario.alpha, q) - pm.price(totals) - own * pm.slope(totals)
    return f


def fitness(scenario: Scenario, state: PopulationState, i: int, k: int, incentives_active: bool = True) -> float:
    """Fitness of strategy ``k`` (0-based; ``k == T`` is slack) in population ``i``."""
    if not 0 <= k <= scenario.n_periods:
        raise IndexError(f"strategy {k} out of range")
    return float(fitness_matrix(scenario, state.x, incentives_active)[i, k])


def _field(kind: str, x: np.ndarray, f: np.ndarray, mass: np.ndarray, eta: float) -> np.ndarray:
    m = mass[:, None]
    if kind == "logit":
        z = f / eta
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return m * e / e.sum(axis=1, keepdims=True) - x
    mean = (x * f).sum(axis=1, keepdims=True) / m
    excess = f - mean
    if kind == "replicator":
        return x * excess
    if kind == "bnn":
        pos = np.maximum(excess, 0.0)
        return m * pos - x * pos.sum(axis=1, keepdims=True)
    if kind == "smith":
        # gain[i, k, g] = [F_k - F_g]_+
        gain = np.maximum(f[:, :, None] - f[:, None, :], 0.0)
        inflow = np.einsum("ikg,ig->ik", gain, x)
        outflow = x * gain.sum(axis=1)
        return inflow - outflow
    raise ValueError(f"unknown dynamics {kind!r}")


def vector_field(
    scenario: Scenario, config: DynamicsConfig, state, incentives_active: bool | None = None
) -> np.ndarray:
    """Time derivative of the state.  ``incentives_active`` defaults to the config at t=0."""
    x = state.x if isinstance(state, PopulationState) else np.asarray(state, float)
    active = config.active(0.0) if incentives_active is None else incentives_active
    f = fitness_matrix(scenario, x, active)
    return _field(config.kind, x, f, np.asarray(scenario.capacity), config.eta)


def potential(scenario: Scenario, state, incentives_active: bool = True) -> float:
    """Potential whose gradient is the fitness.

    With incentives this is the aggregate surplus.  Without them the game is
    still a potential game for affine prices, with the Cournot potential
    ``sum_i v_i - beta (sum_i q_i^2 + sum_{i<j} q_i q_j) - b ||q||``.
    """
    x = state.x if isinstance(state, PopulationState) else np.asarray(state, float)
    q = x[:, :-1]
    if incentives_active:
        return float(surplus_matrix(scenario, q).sum())
    pm = scenario.price
    totals = q.sum(axis=0)
    sq = (q * q).sum(axis=0)
    cross = 0.5 * (totals * totals - sq)
    v = scenario.valuations.value(scenario.alpha, q).sum()
    return float(v - pm.beta * (sq + cross).sum() - pm.b * totals.sum())


def potential_gradient_check(
    scenario: Scenario, state, incentives_active: bool = True, h: float = 1e-5
) -> float:
    """Max abs gap between fitness and central differences of the potential."""
    x = np.array(state.x if isinstance(state, PopulationState) else state, dtype=float)
    f = fitness_matrix(scenario, x, incentives_active)
    worst = 0.0
    for i in range(x.shape[0]):
        for k in range(x.shape[1] - 1):
            up, dn = x.copy(), x.copy()
            up[i, k] += h
            dn[i, k] -= h
            fd = (potential(scenario, up, incentives_active) - potential(scenario, dn, incentives_active)) / (2 * h)
            worst = max(worst, abs(fd - f[i, k]))
    return worst


def initial_state(scenario: Scenario, seed=None, jitter: float = 0.5, interior_eps: float = 1e-6) -> PopulationState:
    """Uniform split of each capacity with multiplicative jitter, renormalised."""
    rng = np.random.default_rng(seed)
    n, t1 = scenario.n_consumers, scenario.n_periods + 1
    w = 1.0 + jitter * rng.uniform(-1.0, 1.0, size=(n, t1))
    cap = np.asarray(scenario.capacity)[:, None]
    x = cap * w / w.sum(axis=1, keepdims=True)
    x = np.maximum(x, interior_eps * cap)
    return PopulationState(cap * x / x.sum(axis=1, keepdims=True))


@dataclass
class Trajectory:
    """Recorded samples of one integration run.

    ``states`` has shape (samples, N, T+1).  ``incentives`` is the average
    per-period outlay paid at each sample (zero while incentives are off).
    """

    times: np.ndarray
    states: np.ndarray
    surplus: np.ndarray
    total_demand: np.ndarray
    incentives: np.ndarray
    active: np.ndarray
    max_mass_drift: float = 0.0
    max_clamp: float = 0.0
    config: DynamicsConfig | None = field(default=None, repr=False)

    def state(self, j: int) -> PopulationState:
        return PopulationState(self.states[j])

    @property
    def final(self) -> PopulationState:
        return self.state(-1)

    @property
    def avg_surplus(self) -> np.ndarray:
        return self.surplus / self.states.shape[1]


def instant_incentives(scenario: Scenario, q: np.ndarray) -> float:
    """Sum over consumers of the period-averaged incentive."""
    if scenario.n_consumers < 2:
        return 0.0
    return float(incentive_matrix(scenario, q).sum() / q.shape[1])


def integrate(scenario: Scenario, config: DynamicsConfig, x0: PopulationState) -> Trajectory:
    """Fixed-step RK4 integration.

    After every step negative entries are clamped to zero and each row is
    rescaled to its capacity; the largest mass drift and clamp are recorded.
    """
    x = np.array(x0.x, dtype=float)
    cap = np.asarray(scenario.capacity)
    if x.shape != (scenario.n_consumers, scenario.n_periods + 1):
        raise ValueError("initial state has the wrong shape")
    if x0.check(cap):
        raise ValueError("invalid initial state: " + "; ".join(x0.check(cap)))
    n_steps = int(math.ceil(config.t_end / config.dt - 1e-9))
    dt = config.dt

    def rhs(y, active):
        return _field(config.kind, y, fitness_matrix(scenario, y, active), cap, config.eta)

    times, states, actives = [0.0], [x.copy()], [config.active(0.0)]
    drift = clamp = 0.0
    for step in range(n_steps):
        t = step * dt
        active = config.active(t)
        k1 = rhs(x, active)
        k2 = rhs(x + 0.5 * dt * k1, active)
        k3 = rhs(x + 0.5 * dt * k2, active)
        k4 = rhs(x + dt * k3, active)
        y = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"{config.kind} integration blew up", t)
        drift = max(drift, float(np.max(np.abs(y.sum(axis=1) - cap))))
        neg = float(-np.min(y, initial=0.0))
        clamp = max(clamp, neg)
        if neg > 0:
            y = np.maximum(y, 0.0)
        x = y * (cap / y.sum(axis=1))[:, None]
        if (step + 1) % config.record_every == 0 or step + 1 == n_steps:
            t_next = (step + 1) * dt
            times.append(t_next)
            states.append(x.copy())
            actives.append(config.active(t_next))

    states = np.array(states)
    q = states[:, :, :-1]
    surplus = np.array([surplus_matrix(scenario, s).sum() for s in q])
    inc = np.array([instant_incentives(scenario, s) if a else 0.0 for s, a in zip(q, actives)])
    return Trajectory(
        times=np.array(times),
        states=states,
        surplus=surplus,
        total_demand=q.sum(axis=(1, 2)),
        incentives=inc,
        active=np.array(actives, dtype=bool),
        max_mass_drift=drift,
        max_clamp=clamp,
        config=config,
    )


def capacity_optimum(scenario: Scenario, tol: float = 1e-13, max_sweeps: int = 10_000) -> PopulationState:
    """Maximiser of the aggregate surplus over each consumer's capacity simplex.

    Block coordinate ascent: consumer ``i``'s block is solved exactly given the
    others, with a bisection on the capacity multiplier when the budget binds.
    """
    pm = scenario.price
    val = scenario.valuations
    n, t = scenario.n_consumers, scenario.n_periods
    cap = np.asarray(scenario.capacity)
    q = np.zeros((n, t))
    totals = q.sum(axis=0)

    def block(i, others, lam):
        # v'(q) = b + 2 beta (s + q) + lam
        return np.maximum(val.solve_marginal(scenario.alpha[i], pm.b + 2 * pm.beta * others + lam, 2 * pm.beta), 0.0)

    for _ in range(max_sweeps):
        change = 0.0
        for i in range(n):
            others = totals - q[i]
            new = block(i, others, 0.0)
            if new.sum() > cap[i]:
                lo, hi = 0.0, 1.0
                while block(i, others, hi).sum() > cap[i]:
                    hi *= 2.0
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    if block(i, others, mid).sum() > cap[i]:
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo <= 1e-15 * hi:
                        break
                new = block(i, others, hi)
            change = max(change, float(np.max(np.abs(new - q[i]))))
            totals = others + new
            q[i] = new
        if change <= tol * max(1.0, float(q.max())):
            break
    return PopulationState.from_demand(scenario, q)


def write_trajectory_csv(path, traj: Trajectory) -> int:
    """Long format ``t,consumer,period,x``; the slack strategy is period T+1."""
    rows = 0
    _, n, t1 = traj.states.shape
    with open(path, "w", newline="") as fh:
        fh.write("t,consumer,period,x\n")
        for t, s in zip(traj.times, traj.states):
            for i in range(n):
                for k in range(t1):
                    fh.write(f"{t:.6g},{i + 1},{k + 1},{s[i, k]:.15g}\n")
                    rows += 1
    return rows


def write_metrics_csv(path, traj: Trajectory) -> int:
    with open(path, "w", newline="") as fh:
        fh.write("t,total_demand,avg_surplus,instant_incentives\n")
        for row in zip(traj.times, traj.total_demand, traj.avg_surplus, traj.incentives):
            fh.write(f"{row[0]:.6g},{row[1]:.15g},{row[2]:.15g},{row[3]:.15g}\n")
    return len(traj.times)
