"""Principal Floquet eigenvalue of the linearisation at zero.

The period map ``U(T, 0)`` of the discrete linear flow is a positive
operator; power iteration on it gives the spectral radius ``rho`` and
``lambda* = ln(rho) / T``. The scheme is first order in ``dt``, so by
default the estimate is Richardson-extrapolated from ``dt`` and ``dt/2``.
The eigenfunction is rebuilt over one period from
``phi(t) = exp(-lambda t) U(t, 0) phi(0)`` with the grid-level eigenvalue,
which makes it exactly periodic for the discrete flow.
"""

from dataclasses import dataclass
import csv
import math

import numpy as np

from ._validation import check_positive, sup_norm
from .exceptions import ConvergenceError, InternalConsistencyError, PreconditionError
from .evolution import linear_propagate
from .geometry import apply_neumann_laplacian


@dataclass
class EigenPair:
    """Principal eigenvalue with its periodic eigenfunction.

    ``phi`` has shape ``(n_slices, 2, n)`` sampled at ``times``;
    ``lambda_star`` is the extrapolated eigenvalue and ``lambda_grid`` the
    value of the discrete flow at step ``dt`` (the one for which the
    envelope bound is exact).
    """

    lambda_star: float
    phi: np.ndarray
    times: np.ndarray
    M: float
    iterations: int
    residual: float
    lambda_grid: float
    dt: float
    period: float

    def __post_init__(self):
        if not np.all(self.phi > 0):
            raise InternalConsistencyError("eigenfunction lost positivity")

    @property
    def phi0(self):
        return self.phi[0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_index", "node", "phi1", "phi2"])
            for j, slc in enumerate(self.phi):
                for i in range(slc.shape[1]):
                    w.writerow([j, i, f"{slc[0, i]:.17g}", f"{slc[1, i]:.17g}"])

    def summary(self):
        return {"lambda_star": self.lambda_star, "M": self.M, "residual": self.residual}


def kinetic_lambda(r, s, a, e):
    """Largest eigenvalue of ``[[-(a+s), r], [s, -e]]``."""
    return 0.5 * (-(a + s + e) + math.sqrt((a + s - e) ** 2 + 4.0 * r * s))


def _period_steps(period, dt):
    n_steps = max(1, math.ceil(period / dt - 1e-9))
    return n_steps, period / n_steps


def monodromy_matrix(params, grid, dt):
    """Dense ``2n x 2n`` matrix of the discrete period map."""
    n = grid.n
    n_steps, h = _period_steps(params.period, dt)
    eye = np.eye(2 * n)
    v1, v2 = linear_propagate((eye[:n], eye[n:]), params, grid, 0.0, n_steps * h, h)
    return np.vstack([v1, v2])


def _power_iteration(apply, v, tol, max_sweeps):
    v = v / np.max(np.abs(v))
    rho_prev = None
    history = []
    for k in range(1, max_sweeps + 1):
        w = apply(v)
        rho = float(np.max(np.abs(w)))
        if not rho > 0 or not np.isfinite(rho):
            raise InternalConsistencyError("period map annihilated a positive vector")
        w = w / rho
        if np.min(w) < 0:
            raise InternalConsistencyError("period map produced a sign change")
        angle = float(np.linalg.norm(w / np.linalg.norm(w) - v / np.linalg.norm(v)))
        history.append(rho)
        if rho_prev is not None and abs(rho - rho_prev) < tol * rho and angle < tol:
            return rho, w, k, history
        v, rho_prev = w, rho
    raise ConvergenceError(
        f"power iteration did not converge in {max_sweeps} sweeps",
        history=history,
        estimate=math.log(history[-1]),
    )


def _dominant(params, grid, dt, tol, max_sweeps, seed, dense_limit):
    n_steps, h = _period_steps(params.period, dt)
    n = grid.n
    if 2 * n <= dense_limit:
        mono = monodromy_matrix(params, grid, h)
        apply = mono.__matmul__
    else:
        def apply(v):
            v1, v2 = linear_propagate((v[:n], v[n:]), params, grid, 0.0, n_steps * h, h)
            return np.concatenate([v1, v2])
    rho, v, sweeps, _ = _power_iteration(apply, seed, tol, max_sweeps)
    return math.log(rho) / params.period, v, sweeps, h


def _reconstruct(params, grid, lam, v, h, slice_stride):
    n = grid.n
    n_steps = round(params.period / h)
    slices = [np.stack([v[:n], v[n:]])]
    times = [0.0]

    def keep(k, t, v1, v2):
        if k % slice_stride == 0 and k < n_steps:
            slices.append(math.exp(-lam * t) * np.stack([v1, v2]))
            times.append(t)

    linear_propagate((v[:n], v[n:]), params, grid, 0.0, n_steps * h, h, callback=keep)
    phi = np.array(slices)
    phi /= phi.max()
    return phi, np.array(times)


def principal_eigenpair(
    params,
    grid,
    dt=1e-3,
    tol=1e-8,
    *,
    max_sweeps=10_000,
    seed=None,
    extrapolate=True,
    slice_stride=None,
    dense_limit=512,
):
    """Power iteration on the discrete period map.

    ``seed`` is a positive ``(2, n)`` array (default all ones). The returned
    ``EigenPair`` stores the slices of the eigenfunction every
    ``slice_stride`` steps (default: at most ~1000 slices per period).
    """
    from .coefficients import validate_h1

    params.check_grid(grid)
    dt = check_positive(dt, "dt")
    tol = check_positive(tol, "tol")
    if not validate_h1(params).satisfied:
        raise PreconditionError("principal_eigenpair requires (H1)")
    n = grid.n
    seed = np.ones(2 * n) if seed is None else np.asarray(seed, dtype=float).reshape(2 * n)
    if np.min(seed) < 0 or not np.any(seed > 0):
        raise PreconditionError("seed must be nonnegative and nonzero")

    lam_h, v, sweeps, h = _dominant(params, grid, dt, tol, max_sweeps, seed, dense_limit)
    lam = lam_h
    if extrapolate:
        lam_half, _, sweeps_half, _ = _dominant(params, grid, h / 2, tol, max_sweeps, v, dense_limit)
        lam = 2.0 * lam_half - lam_h
        sweeps += sweeps_half

    n_steps = round(params.period / h)
    if slice_stride is None:
        slice_stride = max(1, n_steps // 1000)
    phi, times = _reconstruct(params, grid, lam_h, v, h, slice_stride)
    if phi.min() <= 0:
        raise InternalConsistencyError("eigenfunction is not strictly positive")
    pair = EigenPair(
        lambda_star=lam,
        phi=phi,
        times=times,
        M=float(phi.max() / phi.min()),
        iterations=sweeps,
        residual=float("nan"),
        lambda_grid=lam_h,
        dt=h,
        period=params.period,
    )
    pair.residual = eigen_residual(pair, params, grid)
    return pair


def eigen_residual(pair, params, grid, dt=None):
    """Max-norm defect of ``lambda*phi - A(t)phi + d_t phi`` over the slices.

    Uses the grid-level eigenvalue and centred periodic differences in time.
    """
    if not np.all(pair.phi > 0):
        raise PreconditionError("eigenfunction must be strictly positive")
    phi = pair.phi
    m = phi.shape[0]
    if m > 1:
        spacing = pair.period / m
        dphi = (np.roll(phi, -1, axis=0) - np.roll(phi, 1, axis=0)) / (2 * spacing)
    else:
        dphi = np.zeros_like(phi)
    worst = 0.0
    for j, t in enumerate(pair.times):
        co = params.at(t, grid.n)
        p1, p2 = phi[j]
        a1 = params.d1 * apply_neumann_laplacian(grid, p1) + co.r * p2 - (co.s + co.a) * p1
        a2 = params.d2 * apply_neumann_laplacian(grid, p2) + co.s * p1 - co.e * p2
        d1 = pair.lambda_grid * p1 - a1 + dphi[j, 0]
        d2 = pair.lambda_grid * p2 - a2 + dphi[j, 1]
        worst = max(worst, sup_norm(d1, d2))
    return worst


@dataclass
class EnvelopeReport:
    ok: bool
    max_ratio: float
    ratios: np.ndarray
    violations: list


def decay_envelope_check(traj, pair, u0_norm=None, rtol=1e-8):
    """Check ``|u(t)| <= M exp(lambda (t - t0)) |u0|`` at every snapshot."""
    t0 = traj.snapshots[0].t
    if u0_norm is None:
        u0_norm = traj.snapshots[0].norm
    norms = traj.sup_norms()
    if u0_norm == 0:
        ok = bool(np.all(norms == 0))
        return EnvelopeReport(ok, 0.0, np.zeros_like(norms), [] if ok else list(np.flatnonzero(norms)))
    env = pair.M * np.exp(pair.lambda_grid * (traj.times - t0)) * u0_norm
    ratios = norms / env
    bad = [int(i) for i in np.flatnonzero(ratios > 1 + rtol)]
    return EnvelopeReport(not bad, float(ratios.max()), ratios, bad)
