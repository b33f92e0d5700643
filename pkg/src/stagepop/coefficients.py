"""Periodic, spatially heterogeneous coefficients and hypothesis checks.

Every field is evaluated on the nodal grid. Time dependence is stored as
samples at ``k * T / m`` (``k = 0..m-1``) and interpolated linearly with
periodic wrap-around, so ``field(t + T) == field(t)`` holds by construction.
All extremal quantities are taken over the stored samples.
"""

from dataclasses import dataclass, field as dc_field, replace
import enum
import hashlib
import numbers

import numpy as np

from ._validation import check_positive
from .exceptions import ConfigurationError, InternalConsistencyError, ShapeError
from .geometry import apply_neumann_laplacian

COEFFICIENT_NAMES = ("r", "s", "a", "b", "c", "e", "f", "g")

# relative margin below which a strict inequality is treated as equality
_STRICT_RTOL = 1e-12


def _periodic_weights(t, period, m):
    """Bracketing sample indices and linear weight for periodic samples."""
    pos = (t % period) / period * m
    k0 = int(np.floor(pos)) % m
    w = pos - np.floor(pos)
    return k0, (k0 + 1) % m, w


class CoefficientField:
    """Base class; subclasses implement :meth:`values`."""

    period = None

    @property
    def n_nodes(self):
        return None

    @property
    def time_independent(self):
        return True

    @property
    def knot_times(self):
        return np.zeros(1)

    def values(self, t, n):
        raise NotImplementedError

    def sample(self, t, x_index, n=None):
        n = self.n_nodes if n is None else n
        n = x_index + 1 if n is None else n
        if not 0 <= x_index < n:
            raise IndexError(f"node index {x_index} out of range for {n} nodes")
        return float(self.values(t, n)[x_index])

    def _fingerprint(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(CoefficientField):
    value: float
    period: float = None

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ConfigurationError("constant coefficient must be finite")

    def values(self, t, n):
        return np.full(n, float(self.value))

    def _fingerprint(self):
        return ("constant", float(self.value))


@dataclass(frozen=True)
class SpatialProfile(CoefficientField):
    nodal: np.ndarray
    period: float = None

    def __post_init__(self):
        arr = np.array(self.nodal, dtype=float)
        if arr.ndim != 1 or arr.size < 1 or not np.all(np.isfinite(arr)):
            raise ConfigurationError("spatial profile must be a finite 1-D table")
        arr.setflags(write=False)
        object.__setattr__(self, "nodal", arr)

    @property
    def n_nodes(self):
        return self.nodal.size

    def values(self, t, n):
        if n != self.nodal.size:
            raise ShapeError(f"profile has {self.nodal.size} nodes, grid has {n}")
        return self.nodal

    def _fingerprint(self):
        return ("spatial", self.nodal.tobytes())


@dataclass(frozen=True)
class Separable(CoefficientField):
    """``spatial(x) * temporal(t)``; ``spatial`` may be a scalar."""

    spatial: object
    temporal: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        sp_arr = np.array(self.spatial, dtype=float)
        tm_arr = np.array(self.temporal, dtype=float)
        if sp_arr.ndim > 1 or tm_arr.ndim != 1 or tm_arr.size < 1:
            raise ConfigurationError("separable field needs a spatial table and a 1-D temporal table")
        if not (np.all(np.isfinite(sp_arr)) and np.all(np.isfinite(tm_arr))):
            raise ConfigurationError("separable field samples must be finite")
        check_positive(self.period, "period")
        sp_arr.setflags(write=False)
        tm_arr.setflags(write=False)
        object.__setattr__(self, "spatial", sp_arr)
        object.__setattr__(self, "temporal", tm_arr)

    @classmethod
    def from_function(cls, spatial, func, period, n_samples=256):
        times = np.arange(n_samples) * period / n_samples
        return cls(spatial, np.array([func(t) for t in times]), period)

    @property
    def n_nodes(self):
        return None if self.spatial.ndim == 0 else self.spatial.size

    @property
    def time_independent(self):
        return bool(np.all(self.temporal == self.temporal[0]))

    @property
    def knot_times(self):
        m = self.temporal.size
        return np.arange(m) * self.period / m

    def temporal_value(self, t):
        k0, k1, w = _periodic_weights(t, self.period, self.temporal.size)
        return (1.0 - w) * self.temporal[k0] + w * self.temporal[k1]

    def values(self, t, n):
        if self.spatial.ndim == 1 and self.spatial.size != n:
            raise ShapeError(f"profile has {self.spatial.size} nodes, grid has {n}")
        return np.broadcast_to(self.spatial * self.temporal_value(t), (n,))

    def _fingerprint(self):
        return ("separable", self.spatial.tobytes(), self.temporal.tobytes(), float(self.period))


@dataclass(frozen=True)
class GridSamples(CoefficientField):
    """Dense ``(m, n)`` table of time slices over one period."""

    slices: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        arr = np.array(self.slices, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or not np.all(np.isfinite(arr)):
            raise ConfigurationError("grid samples must be a finite (m, n) table")
        check_positive(self.period, "period")
        arr.setflags(write=False)
        object.__setattr__(self, "slices", arr)

    @property
    def n_nodes(self):
        return self.slices.shape[1]

    @property
    def time_independent(self):
        return bool(np.all(self.slices == self.slices[0]))

    @property
    def knot_times(self):
        m = self.slices.shape[0]
        return np.arange(m) * self.period / m

    def values(self, t, n):
        if n != self.slices.shape[1]:
            raise ShapeError(f"table has {self.slices.shape[1]} nodes, grid has {n}")
        k0, k1, w = _periodic_weights(t, self.period, self.slices.shape[0])
        return (1.0 - w) * self.slices[k0] + w * self.slices[k1]

    def _fingerprint(self):
        return ("grid", self.slices.tobytes(), float(self.period))


def as_field(value, name="field"):
    if isinstance(value, CoefficientField):
        return value
    if isinstance(value, numbers.Real) and not isinstance(value, bool):
        return Constant(float(value))
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        return SpatialProfile(arr)
    if arr.ndim == 2:
        return GridSamples(arr)
    raise ConfigurationError(f"cannot interpret {type(value).__name__} as a coefficient", name)


@dataclass(frozen=True)
class Coefficients:
    """Nodal values of all eight coefficients at one time."""

    r: np.ndarray
    s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    e: np.ndarray
    f: np.ndarray
    g: np.ndarray


@dataclass(frozen=True)
class ModelParams:
    """Coefficients, diffusion rates and common period of the model.

    Scalars and nodal arrays are accepted for every coefficient and wrapped
    into :class:`Constant` / :class:`SpatialProfile`.
    """

    r: CoefficientField
    s: CoefficientField
    a: CoefficientField
    b: CoefficientField
    c: CoefficientField
    e: CoefficientField
    f: CoefficientField
    g: CoefficientField
    d1: float = 1.0
    d2: float = 1.0
    period: float = 1.0
    _cache: dict = dc_field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "d1", check_positive(self.d1, "d1"))
        object.__setattr__(self, "d2", check_positive(self.d2, "d2"))
        object.__setattr__(self, "period", check_positive(self.period, "period"))
        sizes = set()
        for name in COEFFICIENT_NAMES:
            fld = as_field(getattr(self, name), name)
            if fld.period is not None and not np.isclose(fld.period, self.period, rtol=1e-12):
                raise ConfigurationError(
                    f"period {fld.period} differs from the model period {self.period}", name
                )
            if fld.n_nodes is not None:
                sizes.add(fld.n_nodes)
            object.__setattr__(self, name, fld)
        if len(sizes) > 1:
            raise ConfigurationError(f"coefficients disagree on node count: {sorted(sizes)}")
        object.__setattr__(self, "_n_nodes", sizes.pop() if sizes else None)
        for name in COEFFICIENT_NAMES:
            samples = self.sampled(name)
            if samples.min() < 0:
                raise ConfigurationError("coefficients must be nonnegative", name)

    @property
    def n_nodes(self):
        return self._n_nodes

    @property
    def time_independent(self):
        return all(getattr(self, k).time_independent for k in COEFFICIENT_NAMES)

    def with_diffusion(self, d1, d2=None):
        return replace(self, d1=d1, d2=d1 if d2 is None else d2)

    def replace(self, **changes):
        return replace(self, **changes)

    def check_grid(self, grid):
        if self.n_nodes is not None and self.n_nodes != grid.n:
            raise ShapeError(f"coefficients have {self.n_nodes} nodes, grid has {grid.n}")

    def at(self, t, n):
        """All eight coefficients at time ``t`` as a :class:`Coefficients`."""
        if self.time_independent:
            key = ("static", n)
            if key not in self._cache:
                self._cache[key] = self._evaluate(0.0, n)
            return self._cache[key]
        return self._evaluate(t, n)

    def _evaluate(self, t, n):
        return Coefficients(*(np.asarray(getattr(self, k).values(t, n), dtype=float) for k in COEFFICIENT_NAMES))

    def sample_times(self):
        """Union of the knot times of all fields within one period."""
        knots = np.concatenate([getattr(self, k).knot_times for k in COEFFICIENT_NAMES])
        return np.unique(np.round(knots % self.period, 14))

    def sampled(self, name, n=None, times=None):
        """``(len(times), n)`` table of one coefficient."""
        n = n or self.n_nodes or 1
        times = self.sample_times() if times is None else times
        fld = getattr(self, name)
        return np.array([fld.values(t, n) for t in times], dtype=float)

    def sup(self, name):
        return float(np.max(self.sampled(name)))

    def inf(self, name):
        return float(np.min(self.sampled(name)))

    def density_bound(self):
        """``max(|r|, |s|) / min(b_min, f_min)``, the a-priori density bound."""
        return max(self.sup("r"), self.sup("s")) / min(self.inf("b"), self.inf("f"))

    def fingerprint(self):
        h = hashlib.sha256()
        for name in COEFFICIENT_NAMES:
            h.update(repr(getattr(self, name)._fingerprint()).encode())
        h.update(repr((self.d1, self.d2, self.period)).encode())
        return h.hexdigest()[:16]


@dataclass
class HypothesisReport:
    name: str
    satisfied: bool
    margins: dict
    violations: list
    applicable: bool = True

    def __post_init__(self):
        if self.applicable and self.satisfied != (not self.violations):
            raise InternalConsistencyError("satisfied must coincide with an empty violation list")

    def __bool__(self):
        return self.satisfied


def _witnesses(mask, label, limit=20):
    idx = np.argwhere(mask)
    return [(int(j), int(i), label) for i, j in idx[:limit]]


def validate_h1(params):
    """Nonnegativity plus strictly positive minima of r, s, b and f."""
    margins, violations = {}, []
    for name in COEFFICIENT_NAMES:
        table = params.sampled(name)
        if name in ("r", "s", "b", "f"):
            margins[f"{name}_min"] = float(table.min())
            violations += _witnesses(table <= 0, name)
        else:
            violations += _witnesses(table < 0, name)
    return HypothesisReport("H1", not violations, margins, violations)


def _h0_table(params, times=None):
    r, s, a, e = (params.sampled(k, times=times) for k in ("r", "s", "a", "e"))
    with np.errstate(divide="ignore", invalid="ignore"):
        return r * s / (a + s) - e


def validate_h3(params):
    """Time independence, ``e_min > 0`` and ``max(rs/(a+s) - e) > 0``."""
    violations = []
    for name in COEFFICIENT_NAMES:
        if not getattr(params, name).time_independent:
            violations.append((-1, -1, f"{name} time-dependent"))
    e = params.sampled("e")
    h0 = _h0_table(params)
    margins = {"e_min": float(e.min()), "h0_max": float(np.nanmax(h0))}
    if not np.all(np.isfinite(h0)):
        violations += _witnesses(~np.isfinite(h0), "a+s=0")
    if margins["e_min"] <= 0:
        violations += _witnesses(e <= 0, "e")
    if not margins["h0_max"] > 0:
        violations.append((-1, -1, "max(rs/(a+s)-e) <= 0"))
    return HypothesisReport("H3", not violations, margins, violations)


def check_h2(params, candidate):
    """Check ``r >= c*u1`` and ``s >= g*u2`` along a periodic candidate.

    ``candidate`` needs ``times``, ``u1`` and ``u2`` attributes with the
    density arrays shaped ``(len(times), n)``.
    """
    u1 = np.asarray(candidate.u1, dtype=float)
    u2 = np.asarray(candidate.u2, dtype=float)
    n = u1.shape[-1]
    if params.n_nodes is not None and params.n_nodes != n:
        raise ShapeError(f"candidate has {n} nodes, coefficients have {params.n_nodes}")
    if u1.shape != u2.shape:
        raise ShapeError("candidate components differ in shape")
    times = np.asarray(candidate.times, dtype=float)
    r, c, s, g = (params.sampled(k, n=n, times=times) for k in ("r", "c", "s", "g"))
    m1 = r - c * u1
    m2 = s - g * u2
    margins = {"r_minus_cu1_min": float(m1.min()), "s_minus_gu2_min": float(m2.min())}
    violations = _witnesses(m1 < 0, "r-c*u1") + _witnesses(m2 < 0, "s-g*u2")
    return HypothesisReport("H2", not violations, margins, violations)


def check_cor2_condition(params, grid, tol=1e-10, n_times=None):
    """Residuals of the two differential inequalities on ``(r/c, s/g)``.

    Time derivatives use centred periodic differences over the sample
    times; ``n_times`` forces a uniform partition instead of the knots.
    """
    params.check_grid(grid)
    T = params.period
    if n_times is None:
        times = params.sample_times()
        uniform = np.allclose(np.diff(np.append(times, T)), T / times.size)
        if not uniform:
            n_times = 256
    if n_times is not None:
        times = np.arange(n_times) * T / n_times
    tab = {k: params.sampled(k, n=grid.n, times=times) for k in COEFFICIENT_NAMES}
    if tab["c"].min() <= 0 or tab["g"].min() <= 0:
        return HypothesisReport(
            "Cor2", False, {}, [(-1, -1, "c or g vanishes")], applicable=False
        )
    rt = tab["r"] / tab["c"]
    st = tab["s"] / tab["g"]
    if times.size > 1:
        step = T / times.size
        drt = (np.roll(rt, -1, axis=0) - np.roll(rt, 1, axis=0)) / (2 * step)
        dst = (np.roll(st, -1, axis=0) - np.roll(st, 1, axis=0)) / (2 * step)
    else:
        drt = np.zeros_like(rt)
        dst = np.zeros_like(st)
    lap_r = np.array([apply_neumann_laplacian(grid, row) for row in rt])
    lap_s = np.array([apply_neumann_laplacian(grid, row) for row in st])
    res1 = drt - params.d1 * lap_r + (tab["a"] + tab["s"] + tab["b"] * rt) * rt
    res2 = dst - params.d2 * lap_s + (tab["e"] + tab["f"] * st) * st
    margins = {"residual_1_min": float(res1.min()), "residual_2_min": float(res2.min())}
    violations = _witnesses(res1 < -tol, "residual_1") + _witnesses(res2 < -tol, "residual_2")
    return HypothesisReport("Cor2", not violations, margins, violations)


class SignCertificate(enum.Enum):
    NEGATIVE = "NegativeCertified"
    POSITIVE = "PositiveCertified"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


def _trapezoid_total(table, times, T, grid):
    """Trapezoidal integral over ``[0, T] x [0, L]`` of periodic samples."""
    space = np.trapezoid(table, dx=grid.spacing, axis=1) if table.shape[1] > 1 else table[:, 0] * grid.length
    if times.size == 1:
        return float(space[0] * T)
    # periodic trapezoid: close the loop with the t = T slice equal to t = 0
    t_ext = np.append(times, T)
    s_ext = np.append(space, space[0])
    return float(np.trapezoid(s_ext, t_ext))


def prop1_sign_certificate(params, grid):
    """Sufficient conditions on the coefficients for the sign of lambda*.

    Returns the certificate together with the quantities it was decided on.
    """
    params.check_grid(grid)
    times = params.sample_times()
    tab = {k: params.sampled(k, n=grid.n, times=times) for k in ("r", "s", "a", "e")}
    r, s, a, e = tab["r"], tab["s"], tab["a"], tab["e"]
    lhs = (r + s) ** 2
    rhs = 4 * (a + s) * e
    tol = _STRICT_RTOL * np.maximum(np.abs(lhs), np.abs(rhs))
    quad_le = bool(np.all(lhs <= rhs + tol))
    quad_strict = bool(np.any(lhs < rhs - tol))
    ratio1 = (a + s) / r
    ratio2 = e / s
    prod_min = float(ratio1.min() * ratio2.min())
    prod_max = float(ratio1.max() * ratio2.max())
    int_sqrt = _trapezoid_total(np.sqrt(r * s), times, params.period, grid)
    int_half = 0.5 * _trapezoid_total(a + s + e, times, params.period, grid)

    negative = (quad_le and quad_strict) or prod_min > 1 + _STRICT_RTOL
    positive = int_sqrt > int_half * (1 + _STRICT_RTOL) or prod_max < 1 - _STRICT_RTOL
    details = {
        "quadratic_le": quad_le,
        "quadratic_strict": quad_strict,
        "ratio_product_min": prod_min,
        "ratio_product_max": prod_max,
        "integral_sqrt_rs": int_sqrt,
        "half_integral_loss": int_half,
    }
    if negative and positive:
        raise InternalConsistencyError(f"both sign certificates fired: {details}")
    if negative:
        return SignCertificate.NEGATIVE, details
    if positive:
        return SignCertificate.POSITIVE, details
    return SignCertificate.INCONCLUSIVE, details


def cor1_structure(params, n=None, rtol=1e-12):
    """Return ``(kappa_c, kappa_g)`` when ``c = kappa_c*r`` and ``g = kappa_g*s``, else None."""
    times = params.sample_times()
    out = []
    for num, den in (("c", "r"), ("g", "s")):
        cn = params.sampled(num, n=n, times=times)
        rd = params.sampled(den, n=n, times=times)
        if rd.min() <= 0:
            return None
        ratio = cn / rd
        kappa = float(np.median(ratio))
        if np.max(np.abs(cn - kappa * rd)) > rtol * max(1.0, np.max(np.abs(cn))):
            return None
        out.append(kappa)
    return tuple(out)
