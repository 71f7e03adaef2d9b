import math

import numpy as np
import pytest
from scipy.optimize import brentq

from drmech.equilibrium import (
    NASH,
    NASH_INCENTIVES,
    OPTIMUM,
    SolverError,
    best_response,
    foc_residual,
    nash_equilibrium,
    social_optimum,
    solve,
    write_csv,
)
from drmech.market import DomainError, aggregate_surplus, surplus_matrix

from conftest import make_scenario, random_scenario

GOLDEN = (math.sqrt(5) - 1) / 2


def grid_optimum_2(sc, step=1e-4, hi=1.5, lo=0.0):
    """Brute-force maximiser of aggregate surplus for two consumers, one period."""
    g = np.arange(lo, hi + step / 2, step)
    a = sc.alpha[:, 0]
    q1, q2 = np.meshgrid(g, g, indexing="ij", sparse=True)
    s = q1 + q2
    total = a[0] * np.log1p(q1) + a[1] * np.log1p(q2) - s * sc.price.price(s)
    i, j = np.unravel_index(np.argmax(total), total.shape)
    return g[i], g[j]


def test_pair_optimum_closed_form(pair):
    mu = social_optimum(pair)
    np.testing.assert_allclose(mu.q[:, 0], 0.5, atol=1e-9)
    # 4q^2 + 4q - 3 = 0 via an independent root finder
    root = brentq(lambda q: 4 * q * q + 4 * q - 3, 0, 2, xtol=1e-14)
    assert mu.q[0, 0] == pytest.approx(root, abs=1e-9)
    assert grid_optimum_2(pair) == pytest.approx((0.5, 0.5), abs=1e-4)


def test_single_consumer():
    # 3/(1+q) = 2q  ->  2q^2 + 2q - 3 = 0
    sc = make_scenario([[3.0]])
    root = (math.sqrt(7) - 1) / 2
    g = np.arange(0, 2, 1e-5)
    assert g[np.argmax(3 * np.log1p(g) - g * g)] == pytest.approx(root, abs=1e-5)
    assert social_optimum(sc).q[0, 0] == pytest.approx(root, abs=1e-9)
    assert nash_equilibrium(sc).q[0, 0] == pytest.approx(root, abs=1e-9)


def test_lower_bound_active(pair):
    sc = pair.with_bounds(lower=0.6)
    mu = social_optimum(sc)
    np.testing.assert_allclose(mu.q[:, 0], 0.6, atol=1e-12)
    assert grid_optimum_2(sc, lo=0.6) == pytest.approx((0.6, 0.6), abs=1e-4)
    assert mu.residual == 0.0


def test_upper_bound_active():
    sc = make_scenario([[3.0], [9.0]], upper=1.0)
    mu = social_optimum(sc)
    assert mu.q[1, 0] == pytest.approx(1.0)
    assert np.all(mu.q <= 1.0)


def test_pair_nash(pair):
    xi = nash_equilibrium(pair)
    np.testing.assert_allclose(xi.q[:, 0], GOLDEN, atol=1e-9)
    # no unilateral deviation on a fine grid beats xi
    g = np.arange(0, 2, 1e-4)
    other = xi.q[1, 0]
    u = 3 * np.log1p(g) - g * (g + other)
    assert g[np.argmax(u)] == pytest.approx(GOLDEN, abs=1e-4)


def test_pair_nash_with_incentives(pair):
    res = nash_equilibrium(pair, with_incentives=True)
    np.testing.assert_allclose(res.q[:, 0], 0.5, atol=1e-9)
    assert res.kind == NASH_INCENTIVES


def test_best_response_examples(pair):
    # 3/(1+q) = (q + 0.5) + q, i.e. 2q^2 + 2.5q - 2.5 = 0
    oracle = brentq(lambda q: 3 / (1 + q) - (q + 0.5) - q, 0, 5, xtol=1e-13)
    assert oracle == pytest.approx((-2.5 + math.sqrt(26.25)) / 4, abs=1e-12)
    assert best_response(pair, 0, 0, 0.5) == pytest.approx(oracle, abs=1e-9)
    assert best_response(pair, 0, 0, 0.5, with_incentives=True) == pytest.approx(0.5, abs=1e-12)
    assert best_response(pair, 0, 0, 1e6) == 0.0
    with pytest.raises(DomainError):
        best_response(pair, 0, 0, -1.0)


def test_residual_examples(pair):
    mu = social_optimum(pair)
    xi = nash_equilibrium(pair)
    assert np.all(np.abs(foc_residual(pair, mu.profile, OPTIMUM)) < 1e-8)
    np.testing.assert_allclose(foc_residual(pair, xi.profile, OPTIMUM), -GOLDEN, atol=1e-9)
    np.testing.assert_allclose(foc_residual(pair, np.zeros((2, 1)), NASH), 3.0)


def test_single_period_selection():
    sc = make_scenario([[3.0, 1.0], [3.0, 2.0]])
    r = social_optimum(sc, k=1)
    assert np.all(r.q[:, 0] == 0)
    full = social_optimum(sc)
    np.testing.assert_allclose(r.q[:, 1], full.q[:, 1], atol=1e-12)
    with pytest.raises(IndexError):
        social_optimum(sc, k=2)


def test_incentive_game_needs_two():
    with pytest.raises(DomainError):
        nash_equilibrium(make_scenario([[3.0]]), with_incentives=True)


def test_solver_error_reports_residual(pair):
    with pytest.raises(SolverError) as info:
        nash_equilibrium(pair, with_incentives=True, max_iter=1)
    assert info.value.iterations == 1
    assert info.value.residual > 0


def test_solve_dispatch(pair):
    assert solve(pair, OPTIMUM).kind == OPTIMUM
    assert solve(pair, NASH).kind == NASH
    with pytest.raises(ValueError):
        solve(pair, "bogus")


@pytest.mark.parametrize("seed", range(20))
def test_best_response_fixed_point(seed):
    rng = np.random.default_rng(seed)
    sc = random_scenario(rng, t=3)
    xi = nash_equilibrium(sc)
    totals = xi.totals()
    for i in range(sc.n_consumers):
        for k in range(sc.n_periods):
            br = best_response(sc, i, k, totals[k] - xi.q[i, k])
            assert br == pytest.approx(xi.q[i, k], abs=1e-9)


def _local_grid_optimum(sc, centre, half=0.02, step=1e-3):
    axes = [np.clip(np.arange(c - half, c + half + step / 2, step), 0, None) for c in centre]
    mesh = np.meshgrid(*axes, indexing="ij")
    q = np.stack([m.ravel() for m in mesh])
    s = q.sum(axis=0)
    val = (sc.alpha[:, :1] * np.log1p(q)).sum(axis=0) - s * sc.price.price(s)
    return q[:, np.argmax(val)]


@pytest.mark.parametrize("seed", range(10))
def test_grid_oracle_small_n(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(1, 4))
    sc = random_scenario(rng, n=n)
    # coarse grid over the box, then a 1e-3 grid around its best point
    coarse = np.arange(0, 4.0, 0.02)
    mesh = np.meshgrid(*([coarse] * n), indexing="ij")
    q = np.stack([m.ravel() for m in mesh])
    s = q.sum(axis=0)
    val = (sc.alpha[:, :1] * np.log1p(q)).sum(axis=0) - s * sc.price.price(s)
    best = _local_grid_optimum(sc, q[:, np.argmax(val)])
    mu = social_optimum(sc).q[:, 0]
    np.testing.assert_allclose(mu, best, atol=2e-3)


def test_heterogeneous_pair_breaks_componentwise_order():
    """Only period totals are ordered: the high-valuation consumer buys more at the optimum."""
    sc = make_scenario([[1.0], [3.0]])
    mu = social_optimum(sc).q[:, 0]
    xi = nash_equilibrium(sc).q[:, 0]
    q2 = brentq(lambda q: 3 / (1 + q) - 2 * q, 0, 5)
    np.testing.assert_allclose(mu, [0.0, q2], atol=1e-9)
    # interior Nash: 1/(1+x1) = 2 x1 + x2 and 3/(1+x2) = 2 x2 + x1
    x1 = brentq(lambda x: 1 / (1 + x) - 2 * x - brentq(lambda y: 3 / (1 + y) - 2 * y - x, 0, 5), 0, 1)
    np.testing.assert_allclose(xi[0], x1, atol=1e-9)
    assert mu[1] > xi[1] + 0.02
    assert mu.sum() < xi.sum()


def test_large_population_solves():
    sc = make_scenario(np.linspace(1, 5, 200)[:, None] * np.ones((1, 4)))
    mu = social_optimum(sc)
    xi = nash_equilibrium(sc)
    assert mu.residual < 1e-9 and xi.residual < 1e-9
    assert aggregate_surplus(sc, mu.profile) > aggregate_surplus(sc, xi.profile)


def test_surplus_gradient_matches_residual():
    rng = np.random.default_rng(3)
    sc = random_scenario(rng, n=4, t=2)
    q = rng.uniform(0.1, 1.0, size=(4, 2))
    h = 1e-6
    for kind in (OPTIMUM, NASH):
        r = foc_residual(sc, q, kind)
        for i in range(4):
            for k in range(2):
                up, dn = q.copy(), q.copy()
                up[i, k] += h
                dn[i, k] -= h
                if kind == OPTIMUM:
                    g = (surplus_matrix(sc, up).sum() - surplus_matrix(sc, dn).sum()) / (2 * h)
                else:
                    g = (surplus_matrix(sc, up)[i, k] - surplus_matrix(sc, dn)[i, k]) / (2 * h)
                assert r[i, k] == pytest.approx(g, abs=1e-6)


def test_csv_rows(tmp_path, pair):
    rows = write_csv(tmp_path / "eq.csv", pair, [social_optimum(pair), nash_equilibrium(pair)])
    lines = (tmp_path / "eq.csv").read_text().splitlines()
    assert rows == 4 and len(lines) == 5
    assert lines[0] == "kind,consumer,period,q,residual"
    assert lines[1].startswith("optimum,1,1,0.5")
