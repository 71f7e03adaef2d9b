import numpy as np
import pytest

from drmech.market import PriceModel, Scenario, ValuationParams
from drmech.scenario_io import default_scenario


def make_scenario(alpha, beta=1.0, b=0.0, capacity=30.0, lower=None, upper=None):
    alpha = np.atleast_2d(np.asarray(alpha, float))
    return Scenario(ValuationParams(alpha), PriceModel(beta, b), np.full(alpha.shape[0], capacity), lower, upper)


def random_scenario(rng, n=None, t=1, heterogeneous=False):
    """Valid random scenario: alpha in [0.5, 6], beta in [0.2, 3], b below every alpha."""
    n = int(rng.integers(1, 9)) if n is None else n
    alpha = rng.uniform(0.5, 6.0, size=(n, t))
    if heterogeneous:
        alpha = np.sort(alpha, axis=0) + np.arange(n)[:, None] * 1e-3
    b = rng.uniform(0.0, 0.9) * alpha.min()
    return make_scenario(alpha, beta=rng.uniform(0.2, 3.0), b=b)


@pytest.fixture
def pair():
    """Two identical consumers, alpha=3, beta=1, b=0, one period."""
    return make_scenario([[3.0], [3.0]])


@pytest.fixture(scope="session")
def default():
    return default_scenario()


# ---- acceptance report -------------------------------------------------------

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    label, text = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _RESULTS[item.nodeid] = (label, text, rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label, text, outcome in sorted(_RESULTS.values(), key=lambda r: _sort_key(r[0])):
        status = "PASS" if outcome == "passed" else "FAIL"
        tr.write_line(f"[{status}] {label:>4}  {text}")


def _sort_key(label):
    digits = "".join(c for c in label if c.isdigit())
    return (int(digits or 0), label)
