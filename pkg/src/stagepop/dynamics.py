"""Periodic and steady positive solutions, extinction/persistence, stability."""

from dataclasses import dataclass, field
import csv
import itertools
import logging
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import check_nodal, check_positive, sup_norm
from .coefficients import check_h2, cor1_structure, validate_h1
from .exceptions import (
    ConvergenceError,
    DegenerateAttractorError,
    ExtinctionRegimeError,
    NumericalResolutionError,
    PreconditionError,
    StepSizeError,
)
from .evolution import PopulationState, advance, integrate, max_stable_dt
from .geometry import apply_neumann_laplacian, laplacian_matrix
from .spectral import decay_envelope_check, principal_eigenpair

logger = logging.getLogger(__name__)


@dataclass
class PeriodicSolution:
    slices: list
    period_defect: float
    positivity_floor: float
    periods: int = 0
    defect_history: list = field(default_factory=list, repr=False)
    dt: float = None

    @property
    def times(self):
        return np.array([s.t for s in self.slices])

    @property
    def u1(self):
        return np.array([s.u1 for s in self.slices])

    @property
    def u2(self):
        return np.array([s.u2 for s in self.slices])

    @property
    def boundary_state(self):
        return self.slices[0]


@dataclass
class SteadyState:
    u1: np.ndarray
    u2: np.ndarray
    residual: float
    newton_iterations: int = 0
    used_fallback: bool = False

    @property
    def times(self):
        return np.zeros(1)

    def as_state(self, t=0.0):
        return PopulationState(t, self.u1.copy(), self.u2.copy())


@dataclass
class DynamicsReport:
    lambda_star: float
    verdict: str
    eta_star: float
    envelope_ok: bool
    attractor: object = None
    per_seed: list = field(default_factory=list)
    eigenpair: object = field(default=None, repr=False)

    def summary(self):
        return {
            "lambda_star": self.lambda_star,
            "verdict": self.verdict,
            "eta_star": self.eta_star,
            "envelope_ok": self.envelope_ok,
        }

    def to_csv(self, path):
        """Per-seed time series of sup-norm and floor."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "t", "sup_norm", "min_floor"])
            for k, rec in enumerate(self.per_seed):
                for t, nrm, flo in zip(rec["times"], rec["norms"], rec["floors"]):
                    w.writerow([k, f"{t:.12g}", f"{nrm:.17g}", f"{flo:.17g}"])


def _period_steps(params, dt):
    n_steps = max(1, math.ceil(params.period / dt - 1e-9))
    return n_steps, params.period / n_steps


def default_seed(params, grid, pair):
    """Eigenfunction slice scaled to 1% of the a-priori density bound."""
    phi0 = pair.phi0
    gamma = 1e-2 * params.density_bound() / phi0.max()
    return PopulationState(0.0, gamma * phi0[0], gamma * phi0[1])


def find_periodic_solution(
    params,
    grid,
    dt=1e-2,
    u0=None,
    tol=1e-6,
    max_periods=2000,
    *,
    pair=None,
    slice_stride=None,
    degenerate_factor=100.0,
):
    """Fixed point of the nonlinear period map by direct iteration.

    Converges when two successive period-boundary states differ by less
    than ``tol``; a limit whose norm is below ``degenerate_factor * tol``
    is the trivial state and raises :class:`DegenerateAttractorError`.
    """
    params.check_grid(grid)
    tol = check_positive(tol, "tol")
    n_steps, h = _period_steps(params, dt)
    if u0 is None:
        if pair is None:
            pair = principal_eigenpair(params, grid, dt=h, extrapolate=False)
        u0 = default_seed(params, grid, pair)
    u1 = check_nodal(u0.u1, grid.n, "u1").copy()
    u2 = check_nodal(u0.u2, grid.n, "u2").copy()
    bound = max(sup_norm(u1, u2), params.density_bound())
    if h > max_stable_dt(params, bound):
        raise StepSizeError(f"dt={h:g} exceeds the stability bound")

    history = []
    for k in range(1, max_periods + 1):
        n1, n2 = advance(u1, u2, params, grid, 0.0, n_steps, h)
        defect = sup_norm(n1 - u1, n2 - u2)
        history.append(defect)
        u1, u2 = n1, n2
        if defect < tol:
            break
    else:
        raise ConvergenceError(
            f"period map did not converge in {max_periods} periods (last defect {history[-1]:.3g})",
            history=history,
            estimate=PopulationState(0.0, u1, u2),
        )
    norm = sup_norm(u1, u2)
    floor = float(min(u1.min(), u2.min()))
    if norm < degenerate_factor * tol or floor <= 0:
        raise DegenerateAttractorError(
            f"period map converged to the trivial state (norm {norm:.3g})",
            history=history,
            estimate=PopulationState(0.0, u1, u2),
        )

    if slice_stride is None:
        slice_stride = max(1, n_steps // 50)
    slices = [PopulationState(0.0, u1.copy(), u2.copy())]
    v1, v2 = u1, u2
    for j in range(0, n_steps, slice_stride):
        m = min(slice_stride, n_steps - j)
        v1, v2 = advance(v1, v2, params, grid, j * h, m, h)
        if j + m < n_steps:
            slices.append(PopulationState((j + m) * h, v1.copy(), v2.copy()))
    period_defect = sup_norm(v1 - u1, v2 - u2)
    floor = min(s.floor for s in slices)
    return PeriodicSolution(slices, period_defect, floor, k, history, h)


def stationary_residual(params, grid, u1, u2):
    """Right-hand side of the time-independent system."""
    co = params.at(0.0, grid.n)
    f1 = params.d1 * apply_neumann_laplacian(grid, u1) + co.r * u2 - (co.s + co.a + co.b * u1 + co.c * u2) * u1
    f2 = params.d2 * apply_neumann_laplacian(grid, u2) + co.s * u1 - (co.e + co.f * u2 + co.g * u1) * u2
    return f1, f2


def _stationary_jacobian(params, grid, u1, u2, lap):
    co = params.at(0.0, grid.n)
    j11 = params.d1 * lap + sp.diags(-(co.s + co.a) - 2 * co.b * u1 - co.c * u2)
    j12 = sp.diags(co.r - co.c * u1)
    j21 = sp.diags(co.s - co.g * u2)
    j22 = params.d2 * lap + sp.diags(-co.e - 2 * co.f * u2 - co.g * u1)
    return sp.bmat([[j11, j12], [j21, j22]], format="csc")


def _newton(params, grid, u1, u2, tol, max_iter=50, max_halvings=40):
    n = grid.n
    lap = laplacian_matrix(grid)
    res = sup_norm(*stationary_residual(params, grid, u1, u2))
    for it in range(max_iter):
        if res < tol:
            return u1, u2, res, it, True
        f1, f2 = stationary_residual(params, grid, u1, u2)
        jac = _stationary_jacobian(params, grid, u1, u2, lap)
        delta = spla.spsolve(jac, -np.concatenate([f1, f2]))
        alpha = 1.0
        for _ in range(max_halvings + 1):
            c1 = u1 + alpha * delta[:n]
            c2 = u2 + alpha * delta[n:]
            new_res = sup_norm(*stationary_residual(params, grid, c1, c2))
            if new_res < res:
                break
            alpha *= 0.5
        else:
            return u1, u2, res, it, False
        u1, u2, res = c1, c2, new_res
    return u1, u2, res, max_iter, res < tol


def find_steady_state(
    params,
    grid,
    tol=1e-10,
    *,
    u0=None,
    dt=None,
    t_relax=30.0,
    fallback_time=2000.0,
    fallback_tol=1e-6,
):
    """Positive equilibrium of time-independent coefficients.

    Relaxes by time integration for ``t_relax``, then polishes with damped
    Newton on the discrete stationary system. If Newton fails, integration
    continues up to ``fallback_time`` and the result is flagged.
    """
    params.check_grid(grid)
    if not params.time_independent:
        raise PreconditionError("find_steady_state needs time-independent coefficients")
    bound = params.density_bound()
    if u0 is None:
        u0 = PopulationState.constant(grid, 0.5 * bound, 0.5 * bound)
    if dt is None:
        dt = min(0.05, 0.5 * max_stable_dt(params, max(bound, u0.norm)))
    state = u0
    if t_relax > 0:
        state = integrate(u0, params, grid, u0.t + t_relax, dt, stride=10**9).final
    if state.norm < 1e-8 * bound:
        raise ExtinctionRegimeError("relaxation collapsed to the trivial state")

    u1, u2, res, its, ok = _newton(params, grid, state.u1, state.u2, tol)
    if ok and min(u1.min(), u2.min()) > 0:
        return SteadyState(u1, u2, res, its, False)

    logger.warning("Newton failed (residual %.3g); falling back to long-time integration", res)
    state = integrate(state, params, grid, state.t + fallback_time, dt, stride=10**9).final
    if state.norm < 1e-8 * bound:
        raise ExtinctionRegimeError("long-time integration collapsed to the trivial state")
    res = sup_norm(*stationary_residual(params, grid, state.u1, state.u2))
    if res > fallback_tol:
        raise ConvergenceError(f"steady state not reached (residual {res:.3g})", estimate=state)
    return SteadyState(state.u1, state.u2, res, its, True)


def seed_battery(params, grid, pair, n_seeds=5, random_state=0):
    """Positive initial data: constants, eigenfunction multiples, random."""
    bound = params.density_bound()
    rng = np.random.default_rng(random_state)
    phi0 = pair.phi0 / pair.phi0.max()
    base = [
        PopulationState.constant(grid, 1e-2 * bound, 1e-2 * bound),
        PopulationState.constant(grid, bound, bound),
        PopulationState(0.0, 0.1 * bound * phi0[0], 0.1 * bound * phi0[1]),
        PopulationState(0.0, bound * phi0[0], bound * phi0[1]),
    ]
    seeds = base[:n_seeds]
    while len(seeds) < n_seeds:
        lo, hi = 1e-2 * bound, bound
        seeds.append(PopulationState(0.0, rng.uniform(lo, hi, grid.n), rng.uniform(lo, hi, grid.n)))
    return seeds


def classify(
    params,
    grid,
    dt=1e-2,
    *,
    t_end=None,
    seeds=None,
    n_seeds=5,
    random_state=0,
    pair=None,
    eigen_dt=1e-3,
    attractor=True,
    periodic_tol=1e-6,
):
    """Extinction/persistence verdict from the sign of lambda* plus a battery check."""
    params.check_grid(grid)
    if not validate_h1(params).satisfied:
        raise PreconditionError("classify requires (H1)")
    if pair is None:
        pair = principal_eigenpair(params, grid, dt=eigen_dt)
    lam = pair.lambda_star
    T = params.period
    if seeds is None:
        seeds = seed_battery(params, grid, pair, n_seeds, random_state)
    seeds = [s for s in seeds if s.norm > 0]
    if t_end is None:
        t_end = min(20.0 / abs(lam), 200.0) if lam != 0 else 200.0
        if lam > 0:
            t_end = max(50.0, 10 * T)

    per_seed = []
    env_ok = True
    if lam <= 0:
        # the envelope is exact for the eigenpair's own step size
        step = pair.dt
        for s in seeds:
            traj = integrate(s, params, grid, t_end, step, stride=max(1, round(0.1 / step)))
            env = decay_envelope_check(traj, pair)
            env_ok &= env.ok
            per_seed.append({"times": traj.times, "norms": traj.sup_norms(), "floors": traj.floors(), "envelope": env})
            if not env.ok or traj.final.norm >= s.norm:
                raise NumericalResolutionError(
                    f"lambda*={lam:.4g} <= 0 but trajectory does not decay inside the envelope; "
                    "try a finer dt or grid"
                )
        return DynamicsReport(lam, "Extinction", 0.0, env_ok, None, per_seed, pair)

    floors = []
    for s in seeds:
        traj = integrate(s, params, grid, t_end, dt, record_all=True)
        later = traj.times >= T - 1e-12
        floor = float(traj.floors()[later].min())
        floors.append(floor)
        per_seed.append({"times": traj.times, "norms": traj.sup_norms(), "floors": traj.floors(), "eta": floor})
        if floor <= 0:
            raise NumericalResolutionError(
                f"lambda*={lam:.4g} > 0 but a seed reached zero; try a finer dt or grid"
            )
    solution = None
    if attractor:
        solution = find_periodic_solution(params, grid, dt, tol=periodic_tol, pair=pair)
    return DynamicsReport(lam, "Persistence", min(floors), True, solution, per_seed, pair)


@dataclass
class StabilityReport:
    converged: bool
    hypothesis: str
    pair_distances: np.ndarray
    attractor_distances: np.ndarray
    periods: int
    attractor: object = None
    t0: float = 0.0

    @property
    def max_pair_distance(self):
        return float(self.pair_distances[-1].max()) if self.pair_distances.size else 0.0

    @property
    def max_attractor_distance(self):
        return float(self.attractor_distances[-1].max())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            n_pairs = self.pair_distances.shape[1] if self.pair_distances.ndim == 2 else 0
            n_seeds = self.attractor_distances.shape[1]
            w.writerow(["period"] + [f"pair_{k}" for k in range(n_pairs)] + [f"seed_{k}_to_attractor" for k in range(n_seeds)])
            for k in range(self.attractor_distances.shape[0]):
                row = list(self.pair_distances[k]) if n_pairs else []
                w.writerow([k + 1] + [f"{v:.17g}" for v in row + list(self.attractor_distances[k])])


def verify_global_stability(
    params,
    grid,
    seeds,
    dt=1e-2,
    tol=1e-4,
    max_periods=200,
    *,
    t0=0.0,
    attractor=None,
    pair=None,
):
    """Integrate every seed from ``t0`` and track period-boundary distances.

    Success requires all pairwise distances and all distances to the
    period-map fixed point to drop below ``tol``. The report is labelled by
    which hypothesis backs the expected convergence: ``Cor1`` (``c/r`` and
    ``g/s`` constant), ``H2`` (checked on the computed attractor) or
    ``hypothesis unverified``.
    """
    params.check_grid(grid)
    n_steps, h = _period_steps(params, dt)
    if attractor is None:
        attractor = find_periodic_solution(params, grid, h, tol=tol * 1e-2, pair=pair)
    if cor1_structure(params, grid.n) is not None:
        label = "Cor1"
    elif check_h2(params, attractor).satisfied:
        label = "H2"
    else:
        label = "hypothesis unverified"

    # attractor phase at t0
    k0 = round(t0 / h)
    ref1, ref2 = attractor.boundary_state.u1, attractor.boundary_state.u2
    if k0 % n_steps:
        ref1, ref2 = advance(ref1, ref2, params, grid, 0.0, k0 % n_steps, h)

    states = [(check_nodal(s.u1, grid.n, "u1").copy(), check_nodal(s.u2, grid.n, "u2").copy()) for s in seeds]
    pairs = list(itertools.combinations(range(len(states)), 2))
    pair_hist, attr_hist = [], []
    converged = False
    for k in range(1, max_periods + 1):
        states = [advance(u1, u2, params, grid, t0 + (k - 1) * params.period, n_steps, h) for u1, u2 in states]
        pair_hist.append([sup_norm(states[i][0] - states[j][0], states[i][1] - states[j][1]) for i, j in pairs])
        attr_hist.append([sup_norm(u1 - ref1, u2 - ref2) for u1, u2 in states])
        if max(pair_hist[-1], default=0.0) < tol and max(attr_hist[-1]) < tol:
            converged = True
            break
    return StabilityReport(
        converged,
        label,
        np.array(pair_hist).reshape(len(attr_hist), len(pairs)),
        np.array(attr_hist),
        len(attr_hist),
        attractor,
        t0,
    )

