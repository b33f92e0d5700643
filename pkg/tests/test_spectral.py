import math

import numpy as np
import pytest

from conftest import constants
from oracles import kinetic_matrix_lambda
from stagepop import (
    ModelParams,
    PopulationState,
    Separable,
    SpatialProfile,
    build_grid,
    decay_envelope_check,
    integrate,
    kinetic_lambda,
    principal_eigenpair,
)
from stagepop.exceptions import InternalConsistencyError, PreconditionError
from stagepop.spectral import EigenPair, eigen_residual, monodromy_matrix

GOLDEN = (math.sqrt(5) - 1) / 2


@pytest.mark.parametrize(
    "args, expected",
    [((1, 1, 1, 2), -1.0), ((1, 1, 0, 0), GOLDEN), ((0, 0, 0.3, 0.7), -0.3), ((0, 0, 0.9, 0.2), -0.2)],
)
def test_kinetic_lambda(args, expected):
    assert kinetic_lambda(*args) == pytest.approx(expected, abs=1e-14)
    assert kinetic_lambda(*args) == pytest.approx(kinetic_matrix_lambda(*args), abs=1e-12)


def test_decay_pair_constant_eigenfunction():
    g = build_grid(1.0, 16)
    pair = principal_eigenpair(constants(r=1, s=1, a=1, e=2), g)
    assert pair.lambda_star == pytest.approx(-1.0, abs=1e-5)
    np.testing.assert_allclose(pair.phi, pair.phi[0, 0, 0], rtol=1e-8)
    assert pair.M == pytest.approx(1.0, abs=1e-8)


def test_growth_pair():
    g = build_grid(1.0, 16)
    pair = principal_eigenpair(constants(r=1, s=1, a=0, e=0), g)
    assert pair.lambda_star == pytest.approx(GOLDEN, abs=1e-5)
    # eigenvector of [[-1, 1], [1, 0]] for lambda is (1, 1 + lambda)
    ratio = pair.phi0[1] / pair.phi0[0]
    np.testing.assert_allclose(ratio, 1 + GOLDEN, rtol=2e-3)


@pytest.mark.parametrize("d1, d2", [(0.01, 0.1), (0.1, 1.0), (1.0, 0.01)])
def test_diffusion_independence_for_constants(d1, d2):
    g = build_grid(1.0, 16)
    pair = principal_eigenpair(constants(r=1.5, s=0.7, a=0.4, e=0.9, d1=d1, d2=d2), g)
    assert pair.lambda_star == pytest.approx(kinetic_lambda(1.5, 0.7, 0.4, 0.9), abs=1e-5)


def test_seed_independence():
    g = build_grid(1.0, 16)
    p = constants(a=SpatialProfile(0.5 + g.nodes), e=0.3, d1=0.05, d2=0.05)
    seed = np.random.default_rng(3).uniform(0.1, 1.0, (2, 16))
    lam_a = principal_eigenpair(p, g, tol=1e-10).lambda_star
    lam_b = principal_eigenpair(p, g, tol=1e-10, seed=seed).lambda_star
    assert abs(lam_a - lam_b) < 1e-8


def test_matrix_free_path_agrees():
    g = build_grid(1.0, 12)
    p = constants(a=SpatialProfile(0.5 + g.nodes), e=0.3, d1=0.05, d2=0.05)
    dense = principal_eigenpair(p, g, dt=1e-2, tol=1e-10, extrapolate=False)
    free = principal_eigenpair(p, g, dt=1e-2, tol=1e-10, extrapolate=False, dense_limit=0)
    assert dense.lambda_grid == pytest.approx(free.lambda_grid, abs=1e-8)


def test_monodromy_is_positive():
    g = build_grid(1.0, 6)
    P = monodromy_matrix(constants(), g, 0.05)
    assert P.shape == (12, 12) and P.min() > 0


def test_time_periodic_eigenvalue_against_floquet_exponent():
    # spatially constant data: lambda* is the Floquet exponent of the 2x2 periodic ODE
    m = 400
    temporal = 1 + 0.8 * np.sin(2 * np.pi * np.arange(m) / m)
    p = ModelParams(r=Separable(1.0, temporal), s=1, a=0.5, b=1, c=0, e=0.5, f=1, g=0, d1=0.1, d2=0.1)
    g = build_grid(1.0, 8)
    pair = principal_eigenpair(p, g, dt=1e-3)

    from scipy.integrate import solve_ivp

    def rhs(t, y):
        r = p.r.temporal_value(t)
        A = np.array([[-1.5, r], [1.0, -0.5]])
        return (A @ y.reshape(2, 2)).ravel()

    sol = solve_ivp(rhs, (0, 1), np.eye(2).ravel(), rtol=1e-12, atol=1e-14, max_step=1e-3)
    rho = np.max(np.abs(np.linalg.eigvals(sol.y[:, -1].reshape(2, 2))))
    assert pair.lambda_star == pytest.approx(np.log(rho), abs=1e-4)


def test_residual_first_order():
    g = build_grid(1.0, 8)
    p = constants(r=1, s=1, a=0, e=0)
    res = [principal_eigenpair(p, g, dt=dt, extrapolate=False).residual for dt in (4e-3, 2e-3, 1e-3)]
    ratios = np.array(res[:-1]) / np.array(res[1:])
    assert np.all(np.abs(ratios - 2.0) < 0.4)


def test_residual_rejects_nonpositive():
    g = build_grid(1.0, 8)
    pair = principal_eigenpair(constants(), g, dt=1e-2)
    pair.phi = pair.phi * 0
    with pytest.raises(PreconditionError):
        eigen_residual(pair, constants(), g)


def test_eigenpair_requires_positive_phi():
    with pytest.raises(InternalConsistencyError):
        EigenPair(0.0, np.zeros((1, 2, 3)), np.zeros(1), 1.0, 0, 0.0, 0.0, 0.1, 1.0)


def test_requires_h1():
    with pytest.raises(PreconditionError):
        principal_eigenpair(constants(b=0.0), build_grid(1.0, 8))


def test_envelope_holds_for_decay():
    g = build_grid(1.0, 16)
    p = constants(r=1, s=1, a=1, e=2, c=0.1, g=0.1)
    pair = principal_eigenpair(p, g)
    tr = integrate(PopulationState.constant(g, 1.0, 1.0), p, g, 10.0, pair.dt, stride=100)
    rep = decay_envelope_check(tr, pair)
    assert rep.ok and rep.max_ratio <= 1 + 1e-8


def test_envelope_zero_data():
    g = build_grid(1.0, 8)
    p = constants(r=1, s=1, a=1, e=2)
    pair = principal_eigenpair(p, g)
    tr = integrate(PopulationState.constant(g, 0.0, 0.0), p, g, 1.0, pair.dt)
    assert decay_envelope_check(tr, pair).ok


def test_envelope_heterogeneous_has_m_above_one():
    g = build_grid(1.0, 16)
    p = constants(r=1, s=1, a=SpatialProfile(1 + 2 * g.nodes), e=2, d1=0.02, d2=0.02)
    pair = principal_eigenpair(p, g)
    assert pair.M > 1.0
    rng = np.random.default_rng(1)
    u0 = PopulationState(0.0, rng.uniform(0.1, 1, 16), rng.uniform(0.1, 1, 16))
    tr = integrate(u0, p, g, 5.0, pair.dt, stride=50)
    assert decay_envelope_check(tr, pair).ok


def test_eigenpair_csv(tmp_path):
    g = build_grid(1.0, 4)
    pair = principal_eigenpair(constants(), g, dt=0.05)
    pair.to_csv(tmp_path / "phi.csv")
    lines = (tmp_path / "phi.csv").read_text().splitlines()
    assert lines[0] == "t_index,node,phi1,phi2"
    assert len(lines) == 1 + pair.phi.shape[0] * 4
