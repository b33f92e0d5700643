"""Estimator-style front end to the solvers.

Hyperparameters (step sizes, tolerances) go to ``__init__``; ``fit`` takes
a :class:`ModelParams` and a :class:`Grid1D` and stores results in
attributes with a trailing underscore. ``get_params``/``set_params`` and
``sklearn.base.clone`` work as usual, which is what parameter sweeps use.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive
from .asymptotics import limit_profile
from .dynamics import classify, find_periodic_solution, find_steady_state
from .evolution import advance
from .exceptions import ShapeError
from .spectral import principal_eigenpair


def _check_fit_args(params, grid):
    params.check_grid(grid)
    return params, grid


class FloquetEigenSolver(BaseEstimator):
    """Principal eigenvalue and eigenfunction of the linearisation at zero."""

    def __init__(self, dt=1e-3, tol=1e-8, max_sweeps=10_000, extrapolate=True):
        self.dt = dt
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.extrapolate = extrapolate

    def fit(self, params, grid):
        params, grid = _check_fit_args(params, grid)
        self.eigenpair_ = principal_eigenpair(
            params, grid, self.dt, self.tol, max_sweeps=self.max_sweeps, extrapolate=self.extrapolate
        )
        self.lambda_star_ = self.eigenpair_.lambda_star
        self.M_ = self.eigenpair_.M
        return self

    def envelope(self, t, u0_norm=1.0):
        """Upper bound ``M exp(lambda t) |u0|`` on solutions of the nonlinear flow."""
        check_is_fitted(self, "eigenpair_")
        pair = self.eigenpair_
        return pair.M * np.exp(pair.lambda_grid * np.asarray(t, dtype=float)) * u0_norm


class PeriodMap(TransformerMixin, BaseEstimator):
    """Nonlinear time-``n_periods*T`` map applied to a batch of states.

    ``transform`` takes an array of shape ``(k, 2, n)`` of nonnegative
    states at a period boundary and returns the states one (or
    ``n_periods``) periods later.
    """

    def __init__(self, dt=1e-2, n_periods=1):
        self.dt = dt
        self.n_periods = n_periods

    def fit(self, params, grid=None):
        if grid is None:
            raise TypeError("PeriodMap.fit needs the grid")
        self.params_, self.grid_ = _check_fit_args(params, grid)
        n_steps = max(1, int(np.ceil(params.period / check_positive(self.dt, "dt") - 1e-9)))
        self.n_steps_ = n_steps * self.n_periods
        self.step_ = params.period / n_steps
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3 or X.shape[1:] != (2, self.grid_.n):
            raise ShapeError(f"expected states of shape (k, 2, {self.grid_.n}), got {X.shape}")
        out = np.empty_like(X)
        for k, state in enumerate(X):
            u1, u2 = advance(state[0], state[1], self.params_, self.grid_, 0.0, self.n_steps_, self.step_)
            out[k, 0], out[k, 1] = u1, u2
        return out


class PeriodicSolutionFinder(BaseEstimator):
    """Positive periodic solution as the fixed point of the period map."""

    def __init__(self, dt=1e-2, tol=1e-6, max_periods=2000):
        self.dt = dt
        self.tol = tol
        self.max_periods = max_periods

    def fit(self, params, grid, u0=None):
        params, grid = _check_fit_args(params, grid)
        self.solution_ = find_periodic_solution(params, grid, self.dt, u0, self.tol, self.max_periods)
        self.period_ = params.period
        return self

    def predict(self, t):
        """Densities ``(2, n)`` at time ``t``, linear in time between stored slices."""
        check_is_fitted(self, "solution_")
        sol = self.solution_
        times = np.append(sol.times, self.period_)
        states = np.array([s.stacked() for s in sol.slices] + [sol.slices[0].stacked()])
        tau = float(t) % self.period_
        j = min(int(np.searchsorted(times, tau, side="right")) - 1, len(times) - 2)
        w = (tau - times[j]) / (times[j + 1] - times[j])
        return (1 - w) * states[j] + w * states[j + 1]


class SteadyStateSolver(BaseEstimator):
    def __init__(self, tol=1e-10, t_relax=30.0):
        self.tol = tol
        self.t_relax = t_relax

    def fit(self, params, grid):
        params, grid = _check_fit_args(params, grid)
        ss = find_steady_state(params, grid, self.tol, t_relax=self.t_relax)
        self.steady_state_ = ss
        self.u1_, self.u2_, self.residual_ = ss.u1, ss.u2, ss.residual
        return self


class PersistenceClassifier(BaseEstimator):
    """Extinction/persistence verdict backed by a trajectory battery.

    ``predict`` labels further parameter sets by the sign of lambda* alone.
    """

    def __init__(self, dt=1e-2, eigen_dt=1e-3, n_seeds=5, random_state=0, t_end=None):
        self.dt = dt
        self.eigen_dt = eigen_dt
        self.n_seeds = n_seeds
        self.random_state = random_state
        self.t_end = t_end

    def fit(self, params, grid):
        params, grid = _check_fit_args(params, grid)
        self.grid_ = grid
        self.report_ = classify(
            params, grid, self.dt, t_end=self.t_end, n_seeds=self.n_seeds,
            random_state=self.random_state, eigen_dt=self.eigen_dt,
        )
        self.lambda_star_ = self.report_.lambda_star
        self.verdict_ = self.report_.verdict
        self.eta_star_ = self.report_.eta_star
        return self

    def predict(self, params_list):
        check_is_fitted(self, "grid_")
        out = []
        for params in params_list:
            lam = principal_eigenpair(params, self.grid_, self.eigen_dt).lambda_star
            out.append("Persistence" if lam > 0 else "Extinction")
        return np.array(out)


class LimitProfileEstimator(BaseEstimator):
    """Zero-diffusion limit of the positive steady state."""

    def __init__(self, tol=1e-12):
        self.tol = tol

    def fit(self, params, grid):
        params, grid = _check_fit_args(params, grid)
        self.profile_ = limit_profile(params, grid, self.tol)
        self.nodes_ = np.array(grid.nodes)
        return self

    def predict(self, x):
        """Profile ``(2, len(x))`` linearly interpolated between nodes."""
        check_is_fitted(self, "profile_")
        x = np.asarray(x, dtype=float)
        return np.stack([
            np.interp(x, self.nodes_, self.profile_.u1_star),
            np.interp(x, self.nodes_, self.profile_.u2_star),
        ])
