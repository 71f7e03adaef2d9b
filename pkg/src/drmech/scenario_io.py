"""Scenario files, base demand profiles and the bundled default scenario.

A scenario file is TOML::

    n_consumers = 5
    n_periods = 24
    beta = 1.0
    b = 0.0
    capacity = 30.0            # scalar or one value per consumer
    lower_bound = 0.1          # optional: scalar, per-consumer list or N x T matrix
    upper_bound = 5.0          # optional, same shapes

    [alpha]
    base_profile_csv = "base_profile.csv"   # relative to the scenario file
    multipliers = [2.0, 2.5, 3.0, 3.5, 4.0]

or ``[alpha] matrix = [[...], ...]`` with an explicit N x T matrix.  With a
base profile, ``alpha[i, k] = multipliers[i] * demand[k] / max(demand)``.
"""

from __future__ import annotations

import csv
import re
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .market import PriceModel, Scenario, ValuationParams

DEFAULT_MULTIPLIERS = (2.0, 2.5, 3.0, 3.5, 4.0)
DEFAULT_CAPACITY = 30.0


class ScenarioFormatError(ValueError):
    """Malformed scenario or profile file; the message carries a line number when known."""


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=", re.M)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(source, text, key, msg):
    line = _line_of(text, key) if text else None
    where = f"{source}:{line}" if line else str(source)
    raise ScenarioFormatError(f"{where}: {msg}")


def read_base_profile(path) -> np.ndarray:
    """Read a ``period,demand`` CSV with one row per period."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ScenarioFormatError(f"{path}: cannot open base profile ({exc.strerror})") from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["period", "demand"]:
        raise ScenarioFormatError(f"{path}:1: expected header 'period,demand'")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ScenarioFormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            period, demand = int(row[0]), float(row[1])
        except ValueError:
            raise ScenarioFormatError(f"{path}:{lineno}: cannot parse {row!r}") from None
        if period != len(values) + 1:
            raise ScenarioFormatError(f"{path}:{lineno}: periods must be numbered 1..T in order")
        if not demand > 0:
            raise ScenarioFormatError(f"{path}:{lineno}: demand must be positive")
        values.append(demand)
    if not values:
        raise ScenarioFormatError(f"{path}: no demand rows")
    return np.array(values)


def alpha_from_profile(base, multipliers) -> np.ndarray:
    base = np.asarray(base, float)
    return np.outer(np.asarray(multipliers, float), base / base.max())


def bundled_profile() -> np.ndarray:
    ref = resources.files("drmech") / "data" / "base_profile.csv"
    with resources.as_file(ref) as path:
        return read_base_profile(path)


def default_scenario(multipliers=DEFAULT_MULTIPLIERS, capacity: float = DEFAULT_CAPACITY, beta: float = 1.0) -> Scenario:
    """Five consumers, 30 kWh daily capacity, unit price slope, 24 hourly periods.

    Valuations follow the bundled synthetic daily demand curve, scaled by a
    strictly increasing ladder of per-consumer multipliers.
    """
    alpha = alpha_from_profile(bundled_profile(), multipliers)
    return Scenario(ValuationParams(alpha), PriceModel(beta, 0.0), np.full(len(multipliers), capacity))


def replicate(scenario: Scenario, n: int) -> Scenario:
    """Scenario with ``n`` consumers, cycling through the rows of ``scenario``."""
    if n < 1:
        raise ValueError("need at least one consumer")
    rows = np.arange(n) % scenario.n_consumers

    def pick(a):
        return None if a is None else np.asarray(a)[rows]

    return Scenario(
        ValuationParams(scenario.alpha[rows]),
        scenario.price,
        np.asarray(scenario.capacity)[rows],
        pick(scenario.lower_bounds),
        pick(scenario.upper_bounds),
    )


def _as_float(source, text, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(source, text, key, f"'{key}' must be a number")
    return float(value)


def _as_array(source, text, key, value, n, t=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        _fail(source, text, key, f"'{key}' must be numeric")
    ok = arr.ndim == 0 or (arr.ndim == 1 and arr.shape[0] == n) or (t is not None and arr.shape == (n, t))
    if not ok:
        _fail(source, text, key, f"'{key}' has shape {arr.shape}; expected scalar, {n} values" + (f" or {n}x{t}" if t else ""))
    return arr


def parse_scenario(text: str, source="<scenario>", base_dir=None) -> Scenario:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioFormatError(f"{source}: {exc}") from None
    for key in ("n_consumers", "beta", "capacity", "alpha"):
        if key not in data:
            raise ScenarioFormatError(f"{source}: missing required key '{key}'")
    n = data["n_consumers"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        _fail(source, text, "n_consumers", "'n_consumers' must be a positive integer")
    beta = _as_float(source, text, "beta", data["beta"])
    b = _as_float(source, text, "b", data.get("b", 0.0))

    spec = data["alpha"]
    if not isinstance(spec, dict):
        _fail(source, text, "alpha", "'alpha' must be a table")
    if "matrix" in spec:
        try:
            alpha = np.asarray(spec["matrix"], dtype=float)
        except (TypeError, ValueError):
            _fail(source, text, "matrix", "alpha matrix must be numeric and rectangular")
        if alpha.ndim != 2 or alpha.shape[0] != n:
            _fail(source, text, "matrix", f"alpha matrix must have {n} rows")
    elif "base_profile_csv" in spec:
        if "multipliers" not in spec:
            _fail(source, text, "base_profile_csv", "a base profile needs 'multipliers'")
        mult = _as_array(source, text, "multipliers", spec["multipliers"], n)
        if mult.ndim != 1:
            _fail(source, text, "multipliers", f"need {n} multipliers")
        csv_path = Path(spec["base_profile_csv"])
        if not csv_path.is_absolute() and base_dir is not None:
            csv_path = Path(base_dir) / csv_path
        alpha = alpha_from_profile(read_base_profile(csv_path), mult)
    else:
        raise ScenarioFormatError(f"{source}: [alpha] needs 'matrix' or 'base_profile_csv'")

    t = alpha.shape[1]
    if "n_periods" in data and data["n_periods"] != t:
        _fail(source, text, "n_periods", f"n_periods={data['n_periods']} but alpha has {t} periods")
    cap = _as_array(source, text, "capacity", data["capacity"], n)
    if cap.ndim == 2:
        _fail(source, text, "capacity", "capacity is per consumer")
    bounds = {}
    for key in ("lower_bound", "upper_bound"):
        if key in data:
            bounds[key] = _as_array(source, text, key, data[key], n, t)
    return Scenario(
        ValuationParams(alpha),
        PriceModel(beta, b),
        np.broadcast_to(cap, (n,)),
        bounds.get("lower_bound"),
        bounds.get("upper_bound"),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioFormatError(f"{path}: cannot read scenario ({exc.strerror})") from None
    return parse_scenario(text, source=path, base_dir=path.parent)


def scenario_to_dict(scenario: Scenario) -> dict:
    out = {
        "n_consumers": scenario.n_consumers,
        "n_periods": scenario.n_periods,
        "beta": float(scenario.price.beta),
        "b": float(scenario.price.b),
        "capacity": [float(c) for c in scenario.capacity],
    }
    if scenario.lower_bounds is not None:
        out["lower_bound"] = np.asarray(scenario.lower_bounds).tolist()
    if scenario.upper_bounds is not None:
        out["upper_bound"] = np.asarray(scenario.upper_bounds).tolist()
    out["alpha"] = {"matrix": scenario.alpha.tolist()}
    return out


def dump_scenario(scenario: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(scenario))


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dump_scenario(scenario))
