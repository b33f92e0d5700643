"""Small-diffusion algebra and the pointwise limit profile.

All point functions accept scalars or nodal arrays in the fields of
:class:`PointParams` and broadcast.
"""

from dataclasses import dataclass
import csv

import numpy as np

from .coefficients import validate_h3
from .exceptions import InternalConsistencyError, PreconditionError

_FIELDS = ("r", "s", "a", "b", "c", "e", "f", "g")


@dataclass(frozen=True)
class PointParams:
    """Time-independent coefficients at one node (or at every node)."""

    r: object
    s: object
    a: object
    b: object
    c: object
    e: object
    f: object
    g: object

    def __post_init__(self):
        for name in _FIELDS:
            value = np.asarray(getattr(self, name), dtype=float)
            if np.any(value < 0):
                raise PreconditionError(f"{name} must be nonnegative")
            object.__setattr__(self, name, value if value.ndim else float(value))
        if np.any(np.asarray(self.a) + np.asarray(self.s) <= 0):
            raise PreconditionError("a + s must be positive")

    @classmethod
    def from_params(cls, params, n=None):
        if not params.time_independent:
            raise PreconditionError("point parameters need time-independent coefficients")
        n = n or params.n_nodes or 1
        co = params.at(0.0, n)
        return cls(*(getattr(co, k) for k in _FIELDS))

    def node(self, i):
        return PointParams(*(np.asarray(getattr(self, k)).flat[i] if np.ndim(getattr(self, k)) else getattr(self, k) for k in _FIELDS))


def g_eps(p, eps, tau):
    loss = p.a + p.s + tau * p.c
    return np.sqrt(loss**2 + 4.0 * tau * p.b * (eps + p.r)) + loss


def w1_eps(p, eps, tau):
    """Positive root ``z`` of ``(r + eps)*tau - (a + s + tau*c)*z - b*z**2 = 0``."""
    return 2.0 * (eps + p.r) * tau / g_eps(p, eps, tau)


def quadratic_identity_defect(p, eps, tau):
    """``eps*tau + (r - c*w1)*tau - (a + s + b*w1)*w1``; zero up to rounding."""
    w1 = w1_eps(p, eps, tau)
    return eps * tau + (p.r - p.c * w1) * tau - (p.a + p.s + p.b * w1) * w1


def h_eps(p, eps):
    return (eps + p.r) * p.s / (p.a + p.s) - p.e


def f_eps(p, eps, tau):
    h_plus = np.maximum(h_eps(p, eps), 0.0)
    shift = 2.0 * (eps + p.r) * p.s * (1.0 / g_eps(p, eps, 0.0) - 1.0 / g_eps(p, eps, tau))
    return h_plus + eps - (shift + (p.g * w1_eps(p, eps, tau) + tau * p.f))


def tau2_bound(p):
    """``(2*max|(2s + rs)/(s + a)| + max|e| + 2) / f_min`` over the nodes of ``p``.

    The numerator expression is used exactly as written; only the sign of
    ``F(., tau2)`` matters downstream and it is checked at run time.
    """
    f_min = float(np.min(p.f))
    if f_min <= 0:
        raise PreconditionError("tau2 needs f_min > 0")
    q = (2.0 * p.s + p.r * p.s) / (p.s + p.a)
    return (2.0 * float(np.max(np.abs(q))) + float(np.max(np.abs(p.e))) + 2.0) / f_min


def solve_w2(p, eps, tol=1e-12, tau2=None):
    """Unique root of ``tau -> F^eps(tau)`` on ``[0, tau2]`` by bisection.

    For ``eps = 0`` nodes with ``h^0 <= 0`` return 0 without a search.
    Vectorised over the nodes of ``p``.
    """
    if not 0.0 <= eps <= 1.0:
        raise PreconditionError("eps must lie in [0, 1]")
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    if tau2 is None:
        tau2 = tau2_bound(p)
    shape = np.broadcast(*(np.asarray(getattr(p, k)) for k in _FIELDS)).shape
    lo = np.zeros(shape)
    hi = np.full(shape, float(tau2))
    f_lo = f_eps(p, eps, lo)
    f_hi = f_eps(p, eps, hi)
    if np.any(f_hi >= 0):
        raise InternalConsistencyError(f"F(tau2) >= 0 at some node (tau2={tau2:g})")
    if eps > 0 and np.any(f_lo < eps):
        raise InternalConsistencyError("F(0) < eps at some node")
    trivial = (eps == 0) & (h_eps(p, 0.0) <= 0)
    while np.max(np.where(trivial, 0.0, hi - lo)) >= tol:
        mid = 0.5 * (lo + hi)
        pos = f_eps(p, eps, mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    root = np.where(trivial, 0.0, 0.5 * (lo + hi))
    return float(root) if root.ndim == 0 else root


def kinetic_residual(p, w1, w2):
    """Right-hand side of the algebraic equilibrium system at ``(w1, w2)``."""
    k1 = (p.r - p.c * w1) * w2 - (p.a + p.s + p.b * w1) * w1
    k2 = (p.s - p.g * w2) * w1 - (p.e + p.f * w2) * w2
    return k1, k2


def kinetic_jacobian(p, w1, w2):
    """2x2 Jacobian of the kinetic right-hand side; shape ``(..., 2, 2)``."""
    j11 = -(p.a + p.s) - 2 * p.b * w1 - p.c * w2
    j12 = p.r - p.c * w1
    j21 = p.s - p.g * w2
    j22 = -p.e - 2 * p.f * w2 - p.g * w1
    j11, j12, j21, j22 = np.broadcast_arrays(j11, j12, j21, j22)
    return np.stack([np.stack([j11, j12], -1), np.stack([j21, j22], -1)], -2)


@dataclass
class LimitProfile:
    u1_star: np.ndarray
    u2_star: np.ndarray
    h0: np.ndarray
    support_mask: np.ndarray
    residual: float
    x: np.ndarray = None

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "x", "h0", "u1_star", "u2_star", "mask"])
            for i in range(self.h0.size):
                w.writerow([i, f"{self.x[i]:.12g}", f"{self.h0[i]:.17g}", f"{self.u1_star[i]:.17g}",
                            f"{self.u2_star[i]:.17g}", int(self.support_mask[i])])


def limit_profile(params, grid, tol=1e-12, residual_tol=1e-10):
    if not validate_h3(params).satisfied:
        raise PreconditionError("limit_profile requires (H3)")
    params.check_grid(grid)
    p = PointParams.from_params(params, grid.n)
    tau2 = tau2_bound(p)
    w2 = np.broadcast_to(solve_w2(p, 0.0, tol, tau2), (grid.n,)).astype(float)
    w1 = np.broadcast_to(w1_eps(p, 0.0, w2), (grid.n,)).astype(float)
    h0 = np.broadcast_to(h_eps(p, 0.0), (grid.n,)).astype(float)
    mask = h0 > 0
    w1 = np.where(mask, w1, 0.0)
    w2 = np.where(mask, w2, 0.0)
    k1, k2 = kinetic_residual(p, w1, w2)
    res = float(max(np.max(np.abs(np.where(mask, k1, 0.0))), np.max(np.abs(np.where(mask, k2, 0.0)))))
    if res > residual_tol:
        raise InternalConsistencyError(f"limit profile residual {res:.3g} exceeds {residual_tol:g}")
    return LimitProfile(w1, w2, h0, mask, res, np.array(grid.nodes))


def sign_change_points(x, h0):
    """Linear-interpolated locations where ``h0 > 0`` switches on or off."""
    pos = h0 > 0
    points = []
    for i in np.flatnonzero(pos[:-1] != pos[1:]):
        x0, x1, y0, y1 = x[i], x[i + 1], h0[i], h0[i + 1]
        points.append(float(x0 - y0 * (x1 - x0) / (y1 - y0)) if y1 != y0 else float(x0))
    return points


def comparison_mask(grid, h0, exclusion_radius):
    x = np.asarray(grid.nodes)
    keep = (x >= exclusion_radius - 1e-12) & (x <= grid.length - exclusion_radius + 1e-12)
    for xc in sign_change_points(x, h0):
        keep &= np.abs(x - xc) >= exclusion_radius - 1e-12
    return keep


@dataclass
class StudyRow:
    d: float
    sup_error: float
    floor: float
    residual: float
    flagged: bool = False
    message: str = ""


def profile_convergence_study(params, grid, d_list, exclusion_radius=None, *, tol=1e-10, steady_kwargs=None):
    """Steady states at ``d1 = d2 = d`` against the limit profile."""
    from .dynamics import find_steady_state

    d_list = list(d_list)
    if not d_list:
        return []
    if any(b >= a for a, b in zip(d_list, d_list[1:])):
        raise PreconditionError("d_list must be strictly decreasing")
    if exclusion_radius is None:
        exclusion_radius = 0.1 * grid.length
    profile = limit_profile(params, grid)
    keep = comparison_mask(grid, profile.h0, exclusion_radius)
    rows = []
    for d in d_list:
        try:
            ss = find_steady_state(params.with_diffusion(d), grid, tol, **(steady_kwargs or {}))
        except Exception as exc:  # a failed point must not stop the study
            rows.append(StudyRow(d, float("nan"), float("nan"), float("nan"), True, str(exc)))
            continue
        err = max(np.max(np.abs(ss.u1 - profile.u1_star)[keep], initial=0.0),
                  np.max(np.abs(ss.u2 - profile.u2_star)[keep], initial=0.0))
        floor = float(min(ss.u1.min(), ss.u2.min()))
        rows.append(StudyRow(d, float(err), floor, ss.residual, ss.used_fallback))
    return rows


def write_study_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "sup_error", "residual"])
        for row in rows:
            w.writerow([f"{row.d:.12g}", f"{row.sup_error:.17g}", f"{row.residual:.17g}"])


def margin_sweep(p, eps_levels=(1e-1, 1e-2, 1e-3), tol=1e-12):
    """First ``eps`` at which ``min(r - c*w1(tau2))`` and ``min(s - g*w2)`` are positive.

    Returns ``(eps, margin_1, margin_2)``, or ``None`` when no level works.
    ``w1`` is increasing in ``tau``, so ``tau2`` gives its worst case.
    """
    tau2 = tau2_bound(p)
    for eps in eps_levels:
        w2 = solve_w2(p, eps, tol, tau2)
        m1 = float(np.min(p.r - p.c * w1_eps(p, eps, tau2)))
        m2 = float(np.min(p.s - p.g * w2))
        if m1 > 0 and m2 > 0:
            return eps, m1, m2
    return None
