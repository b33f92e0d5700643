"""Positivity-preserving IMEX time stepping of the juvenile/adult system.

One step from ``t`` to ``t + dt`` solves, per component, the tridiagonal
system

    (1 + dt*loss_i(u_old)) u_i_new - dt*d_i*Lap u_i_new = u_i_old + dt*gain_i(u_old)

with ``gain_1 = r*u2``, ``gain_2 = s*u1``, ``loss_1 = s + a + b*u1 + c*u2`` and
``loss_2 = e + f*u2 + g*u1``; coefficients are frozen at the midpoint time.
The matrix is an M-matrix, so nonnegative data stay nonnegative for every
``dt``; for spatially constant data the step reduces to
``u_new = u_explicit / (1 + dt*loss)``.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np

from ._validation import check_nodal, check_positive, sup_norm
from .exceptions import (
    BoundViolationError,
    NumericalBlowupError,
    PositivityError,
    StepSizeError,
)
from .geometry import solve_diffusion_system

_BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class PopulationState:
    t: float
    u1: np.ndarray
    u2: np.ndarray

    @classmethod
    def constant(cls, grid, u1, u2, t=0.0):
        return cls(float(t), np.full(grid.n, float(u1)), np.full(grid.n, float(u2)))

    @property
    def norm(self):
        return sup_norm(self.u1, self.u2)

    @property
    def floor(self):
        return float(min(self.u1.min(), self.u2.min()))

    def stacked(self):
        return np.stack([self.u1, self.u2])


@dataclass
class Trajectory:
    snapshots: list
    dt: float
    params_hash: str
    grid: object = field(default=None, repr=False)

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    @property
    def u1(self):
        return np.array([s.u1 for s in self.snapshots])

    @property
    def u2(self):
        return np.array([s.u2 for s in self.snapshots])

    @property
    def final(self):
        return self.snapshots[-1]

    def sup_norms(self):
        return np.array([s.norm for s in self.snapshots])

    def floors(self):
        return np.array([s.floor for s in self.snapshots])

    def to_csv(self, path):
        """Write ``t, node_index, x, u1, u2`` rows."""
        x = self.grid.nodes if self.grid is not None else None
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "node_index", "x", "u1", "u2"])
            for snap in self.snapshots:
                for i in range(snap.u1.size):
                    xi = x[i] if x is not None else float("nan")
                    w.writerow([f"{snap.t:.12g}", i, f"{xi:.12g}", f"{snap.u1[i]:.17g}", f"{snap.u2[i]:.17g}"])


def max_stable_dt(params, state):
    """Conservative step bound for the explicit part of the scheme."""
    rates = sum(params.sup(k) for k in ("r", "s", "a", "e"))
    sinks = sum(params.sup(k) for k in ("b", "c", "f", "g"))
    density = state.norm if isinstance(state, PopulationState) else float(state)
    return 1.0 / (rates + sinks * density + 1.0)


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericalBlowupError("non-finite density encountered")


def _imex_step(grid, params, t, u1, u2, dt, nonlinear=True):
    co = params.at(t + 0.5 * dt, grid.n)
    if u1.ndim == 2:
        co_view = {k: getattr(co, k)[:, None] for k in ("r", "s", "a", "b", "c", "e", "f", "g")}
    else:
        co_view = {k: getattr(co, k) for k in ("r", "s", "a", "b", "c", "e", "f", "g")}
    r, s, a, e = co_view["r"], co_view["s"], co_view["a"], co_view["e"]
    rhs1 = u1 + dt * r * u2
    rhs2 = u2 + dt * s * u1
    if nonlinear:
        loss1 = s + a + co_view["b"] * u1 + co_view["c"] * u2
        loss2 = e + co_view["f"] * u2 + co_view["g"] * u1
        new1 = solve_diffusion_system(grid, params.d1, loss1, rhs1, dt)
        new2 = solve_diffusion_system(grid, params.d2, loss2, rhs2, dt)
    else:
        # linear loss is the same for every column of a batch
        new1 = solve_diffusion_system(grid, params.d1, co.s + co.a, rhs1, dt)
        new2 = solve_diffusion_system(grid, params.d2, co.e, rhs2, dt)
    return new1, new2


def step(state, params, dt, grid, *, check_dt=True):
    """Advance a nonnegative state by one IMEX step."""
    dt = check_positive(dt, "dt")
    if check_dt:
        limit = max_stable_dt(params, state)
        if dt > limit * (1 + 1e-12):
            raise StepSizeError(f"dt={dt:g} exceeds the stability bound {limit:g}")
    if state.u1.min() < 0 or state.u2.min() < 0:
        raise PositivityError("step called on a state with negative densities")
    u1, u2 = _imex_step(grid, params, state.t, state.u1, state.u2, dt)
    _check_finite(u1, u2)
    if u1.min() < 0 or u2.min() < 0:
        raise PositivityError(f"negative density after step at t={state.t + dt:g}")
    return PopulationState(state.t + dt, u1, u2)


def integrate(u0, params, grid, t_end, dt, *, stride=None, record_all=False, check_bound=True):
    """Integrate from ``u0`` to ``t_end``.

    Snapshots are recorded every ``stride`` steps (default: one period's
    worth of steps), at the start and at ``t_end``; ``record_all`` keeps
    every step. The a-priori sup bound is enforced at every step.
    """
    params.check_grid(grid)
    dt = check_positive(dt, "dt")
    u1 = check_nodal(u0.u1, grid.n, "u1").copy()
    u2 = check_nodal(u0.u2, grid.n, "u2").copy()
    if u1.min() < 0 or u2.min() < 0:
        raise PositivityError("initial densities must be nonnegative")
    t0 = float(u0.t)
    if not t_end > t0:
        raise ValueError(f"t_end={t_end} must exceed the initial time {t0}")
    n_steps = max(1, math.ceil((t_end - t0) / dt - 1e-9))
    if stride is None:
        stride = max(1, round(params.period / dt))
    if record_all:
        stride = 1
    bound = max(sup_norm(u1, u2), params.density_bound())
    limit = max_stable_dt(params, bound)
    if dt > limit * (1 + 1e-12):
        raise StepSizeError(f"dt={dt:g} exceeds the stability bound {limit:g}")

    snaps = [PopulationState(t0, u1.copy(), u2.copy())]
    t = t0
    for k in range(1, n_steps + 1):
        h = min(dt, t_end - t) if k == n_steps else dt
        u1, u2 = _imex_step(grid, params, t, u1, u2, h)
        t = t0 + k * dt if k < n_steps else t_end
        _check_finite(u1, u2)
        if u1.min() < 0 or u2.min() < 0:
            raise PositivityError(f"negative density at t={t:g}")
        if check_bound:
            peak = sup_norm(u1, u2)
            if peak > bound * (1 + _BOUND_SLACK):
                raise BoundViolationError(f"sup norm {peak:.6g} exceeds a-priori bound {bound:.6g} at t={t:g}")
        if k % stride == 0 or k == n_steps:
            snaps.append(PopulationState(t, u1.copy(), u2.copy()))
    return Trajectory(snaps, dt, params.fingerprint(), grid)


def advance(u1, u2, params, grid, t0, n_steps, dt):
    """Bare ``n_steps`` nonlinear steps without bookkeeping; returns the arrays."""
    for k in range(n_steps):
        u1, u2 = _imex_step(grid, params, t0 + k * dt, u1, u2, dt)
    _check_finite(u1, u2)
    if u1.min() < 0 or u2.min() < 0:
        raise PositivityError("negative density during advance")
    return u1, u2


def linear_propagate(v0, params, grid, t0, t_end, dt, *, callback=None):
    """Apply the discrete evolution operator ``U(t_end, t0)`` of the linearisation.

    ``v0`` is a pair ``(v1, v2)`` of signed nodal arrays, optionally with a
    trailing batch dimension. ``callback(k, t, v1, v2)`` is invoked after
    every step when given.
    """
    params.check_grid(grid)
    dt = check_positive(dt, "dt")
    v1 = check_nodal(v0[0], grid.n, "v1", allow_batch=True).copy()
    v2 = check_nodal(v0[1], grid.n, "v2", allow_batch=True).copy()
    if t_end < t0:
        raise ValueError("t_end must not precede t0")
    n_steps = math.ceil((t_end - t0) / dt - 1e-9)
    t = float(t0)
    for k in range(1, n_steps + 1):
        h = min(dt, t_end - t) if k == n_steps else dt
        v1, v2 = _imex_step(grid, params, t, v1, v2, h, nonlinear=False)
        t = t0 + k * dt if k < n_steps else t_end
        if callback is not None:
            callback(k, t, v1, v2)
    _check_finite(v1, v2)
    return v1, v2
