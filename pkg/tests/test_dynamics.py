import numpy as np
import pytest
from scipy.optimize import minimize

from drmech import dynamics
from drmech.dynamics import (
    KINDS,
    DynamicsConfig,
    IntegrationError,
    PopulationState,
    _field,
    capacity_optimum,
    fitness,
    fitness_matrix,
    initial_state,
    integrate,
    potential,
    potential_gradient_check,
    vector_field,
    write_metrics_csv,
    write_trajectory_csv,
)
from drmech.equilibrium import social_optimum

from conftest import make_scenario


@pytest.fixture
def pair30():
    return make_scenario([[3.0], [3.0]], capacity=30.0)


def random_interior(sc, rng):
    cap = np.asarray(sc.capacity)[:, None]
    w = rng.uniform(0.2, 1.0, size=(sc.n_consumers, sc.n_periods + 1))
    return PopulationState(cap * w / w.sum(axis=1, keepdims=True))


def test_fitness_examples(pair30):
    st = PopulationState([[1.0, 29.0], [1.0, 29.0]])
    assert fitness(pair30, st, 0, 0, True) == pytest.approx(1.5 - 2 - 2)
    assert fitness(pair30, st, 0, 0, False) == pytest.approx(1.5 - 2 - 1)
    assert fitness(pair30, st, 1, 1, True) == 0.0
    with pytest.raises(IndexError):
        fitness(pair30, st, 0, 2)
    at_mu = PopulationState.from_demand(pair30, social_optimum(pair30).q)
    np.testing.assert_allclose(fitness_matrix(pair30, at_mu.x, True), 0.0, atol=1e-9)


def test_replicator_toy():
    out = _field("replicator", np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]]), np.array([1.0]), 0.1)
    np.testing.assert_allclose(out, [[0.25, -0.25]])


@pytest.mark.parametrize("kind", ["replicator", "bnn", "smith"])
def test_equal_fitness_is_rest(kind):
    x = np.array([[0.2, 0.3, 0.5], [1.0, 2.0, 3.0]])
    out = _field(kind, x, np.full_like(x, 0.7), x.sum(axis=1), 0.1)
    np.testing.assert_allclose(out, 0.0, atol=1e-15)


def test_logit_rest_point():
    f = np.array([[0.3, -0.2, 0.0]])
    z = np.exp(f / 0.1)
    x = 4.0 * z / z.sum()
    np.testing.assert_allclose(_field("logit", x, f, np.array([4.0]), 0.1), 0.0, atol=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_fields_conserve_mass_and_correlate(kind, default):
    rng = np.random.default_rng(11)
    cfg = DynamicsConfig(kind=kind)
    for _ in range(10):
        st = random_interior(default, rng)
        v = vector_field(default, cfg, st)
        np.testing.assert_allclose(v.sum(axis=1), 0.0, atol=1e-12 * (1 + np.abs(v).max()))
        if kind != "logit":
            assert (v * fitness_matrix(default, st.x, True)).sum() >= -1e-9


def test_smith_field_matches_pairwise_loop():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, size=(2, 4))
    f = rng.normal(size=(2, 4))
    out = _field("smith", x, f, x.sum(axis=1), 0.1)
    for i in range(2):
        for k in range(4):
            inflow = sum(x[i, g] * max(f[i, k] - f[i, g], 0) for g in range(4))
            outflow = x[i, k] * sum(max(f[i, g] - f[i, k], 0) for g in range(4))
            assert out[i, k] == pytest.approx(inflow - outflow, abs=1e-14)


def test_config_validation():
    with pytest.raises(ValueError):
        DynamicsConfig(kind="nope")
    with pytest.raises(ValueError):
        DynamicsConfig(kind="logit", eta=0.0)
    with pytest.raises(ValueError):
        DynamicsConfig(dt=0.0)
    with pytest.raises(ValueError):
        DynamicsConfig(t_end=6.0, incentive_window=(4.0, 2.0))
    with pytest.raises(ValueError):
        DynamicsConfig(t_end=3.0, incentive_window=(2.0, 4.0))
    cfg = DynamicsConfig(t_end=6.0, incentive_window=(2.0, 4.0))
    assert [cfg.active(t) for t in (1.9, 2.0, 3.9, 4.0)] == [False, True, True, False]


def test_initial_state_valid(default):
    a = initial_state(default, seed=42)
    b = initial_state(default, seed=42)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.check(default.capacity) == []
    assert a.x.min() > 0


@pytest.mark.parametrize("kind", ["smith", "bnn", "replicator"])
def test_rest_point_stays(kind, default):
    x0 = capacity_optimum(default)
    tr = integrate(default, DynamicsConfig(kind=kind, t_end=0.5, record_every=100), x0)
    assert np.abs(tr.states - x0.x).max() < 1e-8


def test_pair_converges_to_optimum(pair30):
    x0 = initial_state(pair30, seed=3)
    tr = integrate(pair30, DynamicsConfig(kind="smith", t_end=10.0, record_every=1000), x0)
    np.testing.assert_allclose(tr.final.q[:, 0], 0.5, atol=1e-4)
    np.testing.assert_allclose(tr.final.slack, 29.5, atol=1e-4)


def test_trajectory_invariants(default):
    tr = integrate(default, DynamicsConfig(kind="bnn", t_end=1.0, record_every=50), initial_state(default, seed=1))
    assert np.all(np.diff(tr.times) > 0)
    assert tr.times[-1] == pytest.approx(1.0)
    assert tr.max_mass_drift < 1e-6 and tr.max_clamp <= 1e-6
    for j in range(len(tr.times)):
        assert tr.state(j).check(default.capacity) == []
    assert tr.avg_surplus[-1] == pytest.approx(tr.surplus[-1] / 5)


def test_window_switches_incentives(default):
    cfg = DynamicsConfig(kind="smith", t_end=6.0, incentive_window=(2.0, 4.0), record_every=100)
    tr = integrate(default, cfg, initial_state(default, seed=1))
    t = tr.times
    assert np.all(tr.incentives[(t < 2.0) | (t >= 4.0)] == 0)
    assert np.all(tr.incentives[(t >= 2.0) & (t < 4.0)] > 0)
    d = tr.total_demand
    at = lambda s: d[np.argmin(np.abs(t - s))]  # noqa: E731
    assert at(4.0) < at(2.0) - 1.0 and at(6.0) > at(4.0) + 1.0


def test_replicator_keeps_faces(default):
    x = initial_state(default, seed=2).x.copy()
    x[1, 3] = 0.0
    x[1] *= default.capacity[1] / x[1].sum()
    tr = integrate(default, DynamicsConfig(kind="replicator", t_end=1.0, record_every=100), PopulationState(x))
    assert np.all(tr.states[:, 1, 3] == 0.0)


def test_blow_up_raises(default, monkeypatch):
    monkeypatch.setattr(dynamics, "fitness_matrix", lambda *a, **k: np.full((5, 25), np.nan))
    with pytest.raises(IntegrationError) as info:
        integrate(default, DynamicsConfig(kind="smith", t_end=0.01), initial_state(default, seed=0))
    assert info.value.last_time == 0.0


def test_invalid_start_rejected(default):
    with pytest.raises(ValueError):
        integrate(default, DynamicsConfig(), PopulationState(np.ones((5, 25))))


@pytest.mark.parametrize("active", [True, False])
def test_potential_gradient(active, default):
    rng = np.random.default_rng(7)
    for _ in range(5):
        assert potential_gradient_check(default, random_interior(default, rng), active) < 1e-5


def test_potential_maximised_at_optimum(default):
    rng = np.random.default_rng(8)
    best = capacity_optimum(default)
    top = potential(default, best)
    for _ in range(50):
        q = np.maximum(best.q + rng.normal(scale=0.05, size=best.q.shape), 0.0)
        assert potential(default, PopulationState.from_demand(default, q)) <= top + 1e-12


def test_capacity_optimum_slsqp_oracle():
    # tight capacities so the daily budget binds for some consumers
    rng = np.random.default_rng(9)
    alpha = np.sort(rng.uniform(1, 6, size=(3, 4)), axis=0)
    sc = make_scenario(alpha, capacity=1.5)
    ours = capacity_optimum(sc).q
    n, t = alpha.shape

    def neg(z):
        q = z.reshape(n, t)
        s = q.sum(axis=0)
        return -((alpha * np.log1p(q)).sum() - (s * s).sum())

    cons = [{"type": "ineq", "fun": (lambda z, i=i: 1.5 - z.reshape(n, t)[i].sum())} for i in range(n)]
    res = minimize(neg, np.full(n * t, 0.1), bounds=[(0, None)] * (n * t), constraints=cons, method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 1000})
    np.testing.assert_allclose(ours, res.x.reshape(n, t), atol=1e-5)
    assert np.any(np.isclose(ours.sum(axis=1), 1.5))


def test_capacity_optimum_matches_unconstrained(default):
    np.testing.assert_allclose(capacity_optimum(default).q, social_optimum(default).q, atol=1e-10)


def test_csv_writers(tmp_path, pair30):
    tr = integrate(pair30, DynamicsConfig(kind="logit", t_end=0.05, record_every=10), initial_state(pair30, seed=0))
    rows = write_trajectory_csv(tmp_path / "t.csv", tr)
    assert rows == len(tr.times) * 2 * 2
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,consumer,period,x" and lines[2].split(",")[2] == "2"
    assert write_metrics_csv(tmp_path / "m.csv", tr) == len(tr.times)
    assert (tmp_path / "m.csv").read_text().startswith("t,total_demand,avg_surplus,instant_incentives\n")
