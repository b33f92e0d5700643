"""Scenario files.

A scenario is a TOML document::

    name = "extinction"
    dt = 1e-3
    horizon = 10.0

    [grid]
    length = 1.0
    n = 64

    [model]
    period = 1.0
    d1 = 0.1
    d2 = 0.1

    [model.coefficients]
    r = 1.0                                   # constant
    a = { nodal = [0.5, 0.6, ...] }           # one value per node
    e = { nodal_csv = "data/e.csv" }          # same, from a one-column CSV
    c = { separable = { spatial = 0.6, temporal_csv = "data/forcing.csv" } }

Command-specific options live in tables named after the command
(``[eigen]``, ``[profile]``, ...). Paths are relative to the scenario file.
"""

from dataclasses import dataclass, field
import copy
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .coefficients import COEFFICIENT_NAMES, Constant, ModelParams, Separable, SpatialProfile
from .evolution import PopulationState
from .exceptions import ConfigurationError, StagePopError
from .geometry import build_grid


@dataclass
class Scenario:
    name: str
    grid: object
    params: object
    dt: float
    horizon: float
    options: dict
    raw: dict = field(repr=False)
    base_dir: Path = field(default=Path("."), repr=False)
    output: str = None

    def section(self, command):
        return dict(self.options.get(command, {}))


def _require(table, key, where):
    if key not in table:
        raise ConfigurationError(f"missing required field '{key}'", f"{where}.{key}" if where else key)
    return table[key]


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"expected a number, got {value!r}", where)
    return float(value)


def _table(value, where, base_dir):
    if isinstance(value, dict) and len(value) == 1 and "csv" in value:
        return _read_column(value["csv"], where, base_dir)
    if not isinstance(value, list) or not value:
        raise ConfigurationError("expected a non-empty list of numbers", where)
    return np.array([_number(v, where) for v in value])


def _read_column(rel, where, base_dir):
    path = (base_dir / rel).resolve()
    if not path.is_file():
        raise ConfigurationError(f"table file not found: {rel}", where)
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=1, comments="#")
    except ValueError as exc:
        raise ConfigurationError(f"cannot read {rel}: {exc}", where) from exc
    if data.ndim != 1:
        raise ConfigurationError(f"{rel} must hold a single column", where)
    return data


def parse_coefficient(spec, where, period, base_dir):
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Constant(float(spec))
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigurationError(
            "expected a number or a table with one of constant / nodal / nodal_csv / separable", where
        )
    kind, body = next(iter(spec.items()))
    if kind == "constant":
        return Constant(_number(body, f"{where}.constant"))
    if kind == "nodal":
        return SpatialProfile(_table(body, f"{where}.nodal", base_dir))
    if kind == "nodal_csv":
        return SpatialProfile(_read_column(body, f"{where}.nodal_csv", base_dir))
    if kind == "separable":
        if not isinstance(body, dict):
            raise ConfigurationError("separable needs spatial and temporal entries", where)
        sp_raw = _require(body, "spatial", f"{where}.separable")
        spatial = _number(sp_raw, f"{where}.separable.spatial") if not isinstance(sp_raw, (list, dict)) \
            else _table(sp_raw, f"{where}.separable.spatial", base_dir)
        if "temporal_csv" in body:
            temporal = _read_column(body["temporal_csv"], f"{where}.separable.temporal_csv", base_dir)
        else:
            temporal = _table(_require(body, "temporal", f"{where}.separable"), f"{where}.separable.temporal", base_dir)
        return Separable(spatial, temporal, period)
    raise ConfigurationError(f"unknown coefficient kind '{kind}'", where)


def build_scenario(raw, base_dir=Path("."), name=None):
    raw = copy.deepcopy(raw)
    name = raw.get("name", name or "scenario")
    try:
        grid_tab = _require(raw, "grid", "")
        length = _number(_require(grid_tab, "length", "grid"), "grid.length")
        n = _require(grid_tab, "n", "grid")
        if isinstance(n, bool) or not isinstance(n, int):
            raise ConfigurationError("node count must be an integer", "grid.n")
        grid = build_grid(length, n)

        model = _require(raw, "model", "")
        period = _number(model.get("period", 1.0), "model.period")
        d1 = _number(_require(model, "d1", "model"), "model.d1")
        d2 = _number(_require(model, "d2", "model"), "model.d2")
        coeffs_tab = _require(model, "coefficients", "model")
        unknown = set(coeffs_tab) - set(COEFFICIENT_NAMES)
        if unknown:
            raise ConfigurationError(f"unknown coefficients {sorted(unknown)}", "model.coefficients")
        coeffs = {
            k: parse_coefficient(_require(coeffs_tab, k, "model.coefficients"), f"model.coefficients.{k}", period, base_dir)
            for k in COEFFICIENT_NAMES
        }
        params = ModelParams(**coeffs, d1=d1, d2=d2, period=period)
        params.check_grid(grid)
        dt = _number(raw.get("dt", 1e-2), "dt")
        horizon = _number(raw.get("horizon", 10.0), "horizon")
        if dt <= 0 or horizon <= 0:
            raise ConfigurationError("dt and horizon must be positive", "dt" if dt <= 0 else "horizon")
    except ConfigurationError:
        raise
    except StagePopError as exc:
        raise ConfigurationError(str(exc)) from exc
    options = {k: v for k, v in raw.items() if isinstance(v, (dict, list)) and k not in ("grid", "model")}
    return Scenario(name, grid, params, dt, horizon, options, raw, Path(base_dir), raw.get("output"))


def load_scenario(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"scenario file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path.name}: {exc}") from exc
    return build_scenario(raw, path.parent, path.stem)


def resolve_scenario_path(name_or_path):
    """Accept a path, or a bare name looked up under ``scenarios/``."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    roots = [Path.cwd() / "scenarios", Path(__file__).resolve().parents[2] / "scenarios"]
    for root in roots:
        for cand in (root / name_or_path, root / f"{name_or_path}.toml"):
            if cand.is_file():
                return cand
    return p


def parse_seeds(specs, grid, pair=None, random_seed=0):
    """Initial states from ``[[seeds]]`` entries.

    ``kind`` is ``constant`` (``u1``, ``u2``), ``eigen`` (``scale`` times
    the eigenfunction slice at t=0), ``nodal`` (tables ``u1``, ``u2``) or
    ``random`` (uniform in ``[low, high]``, seeded by ``random_seed``).
    """
    rng = np.random.default_rng(random_seed)
    out = []
    for k, spec in enumerate(specs):
        where = f"seeds[{k}]"
        kind = spec.get("kind", "constant")
        if kind == "constant":
            out.append(PopulationState.constant(grid, _number(spec.get("u1", 1.0), where), _number(spec.get("u2", 1.0), where)))
        elif kind == "eigen":
            if pair is None:
                raise ConfigurationError("eigen seeds need an eigenpair", where)
            scale = _number(spec.get("scale", 1.0), f"{where}.scale")
            phi0 = pair.phi0
            out.append(PopulationState(0.0, scale * phi0[0], scale * phi0[1]))
        elif kind == "nodal":
            u1 = _table(_require(spec, "u1", where), f"{where}.u1", Path("."))
            u2 = _table(_require(spec, "u2", where), f"{where}.u2", Path("."))
            if u1.size != grid.n or u2.size != grid.n:
                raise ConfigurationError(f"nodal seed needs {grid.n} values", where)
            out.append(PopulationState(0.0, u1, u2))
        elif kind == "random":
            lo = _number(spec.get("low", 0.01), f"{where}.low")
            hi = _number(spec.get("high", 1.0), f"{where}.high")
            out.append(PopulationState(0.0, rng.uniform(lo, hi, grid.n), rng.uniform(lo, hi, grid.n)))
        else:
            raise ConfigurationError(f"unknown seed kind '{kind}'", where)
    return out
