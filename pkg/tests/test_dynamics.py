import math

import numpy as np
import pytest

from conftest import constants
from oracles import kinetic_equilibrium
from stagepop import (
    ModelParams,
    PopulationState,
    Separable,
    SpatialProfile,
    build_grid,
    classify,
    find_periodic_solution,
    find_steady_state,
    principal_eigenpair,
    verify_global_stability,
)
from stagepop.dynamics import DegenerateAttractorError, stationary_residual
from stagepop.exceptions import PreconditionError

EQ = kinetic_equilibrium(2, 1, 0, 0.5, 1, 1)


def equilibrium_params(**kw):
    return constants(r=2, s=1, a=0, e=0.5, **kw)


def forced(c_ratio=0.3, g_ratio=0.2, n=16):
    r = Separable.from_function(2.0, lambda t: 1 + 0.5 * math.sin(2 * math.pi * t), 1.0, 200)
    c = Separable(2.0 * c_ratio, r.temporal)
    x = np.linspace(0, 1, n)
    return ModelParams(r=r, s=1.0, a=SpatialProfile(0.5 + 0.5 * x), b=1, c=c, e=0.5, f=1, g=g_ratio, d1=0.05, d2=0.05)


def test_periodic_solver_finds_equilibrium(grid16):
    sol = find_periodic_solution(equilibrium_params(), grid16, tol=1e-8)
    for s in sol.slices:
        np.testing.assert_allclose(s.u1, EQ[0], atol=1e-6)
        np.testing.assert_allclose(s.u2, EQ[1], atol=1e-6)
    assert sol.period_defect < 1e-7 and sol.positivity_floor > 0.6


def test_periodic_solver_degenerate_below_threshold(grid16):
    with pytest.raises(DegenerateAttractorError):
        find_periodic_solution(constants(r=1, s=1, a=1, e=2), grid16)


def test_forced_seeds_agree():
    g = build_grid(1.0, 16)
    p = forced()
    tol = 1e-7
    a = find_periodic_solution(p, g, tol=tol, u0=PopulationState.constant(g, 0.01, 0.01))
    b = find_periodic_solution(p, g, tol=tol, u0=PopulationState.constant(g, 5.0, 5.0))
    diff = max(np.abs(a.boundary_state.u1 - b.boundary_state.u1).max(),
               np.abs(a.boundary_state.u2 - b.boundary_state.u2).max())
    assert diff < 10 * tol


def test_steady_state_matches_oracle_and_periodic(grid16):
    p = equilibrium_params()
    ss = find_steady_state(p, grid16)
    assert ss.residual < 1e-10
    np.testing.assert_allclose(ss.u1, EQ[0], atol=1e-9)
    np.testing.assert_allclose(ss.u2, EQ[1], atol=1e-9)
    sol = find_periodic_solution(p, grid16, tol=1e-9)
    np.testing.assert_allclose(sol.boundary_state.u1, ss.u1, atol=1e-6)


def test_steady_state_heterogeneous():
    g = build_grid(1.0, 64)
    p = constants(r=SpatialProfile(1 + 0.5 * np.sin(np.pi * g.nodes)), a=0.2, e=0.3, d1=0.01, d2=0.01)
    ss = find_steady_state(p, g, 1e-10)
    assert ss.residual < 1e-10
    assert ss.u1.min() > 0 and ss.u2.min() > 0
    assert np.ptp(ss.u1) > 1e-3
    r1, r2 = stationary_residual(p, g, ss.u1, ss.u2)
    assert max(np.abs(r1).max(), np.abs(r2).max()) < 1e-10


def test_steady_state_needs_time_independence(grid16):
    with pytest.raises(PreconditionError):
        find_steady_state(forced(), grid16)


def test_classify_extinction(grid16):
    p = constants(r=1, s=1, a=1, e=2, c=0.1, g=0.1)
    rep = classify(p, grid16, seeds=[PopulationState.constant(grid16, 1.0, 1.0)], t_end=10.0)
    assert rep.verdict == "Extinction" and rep.envelope_ok
    final = rep.per_seed[0]["norms"][-1]
    assert final <= math.exp(-10.0) * (1 + 1e-6)


def test_classify_persistence(grid16):
    rep = classify(constants(r=1, s=1, a=0, e=0), grid16, t_end=20.0, attractor=False)
    assert rep.verdict == "Persistence" and rep.eta_star > 0
    assert rep.lambda_star == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-5)


def test_classify_drops_zero_seed(grid16):
    p = constants(r=1, s=1, a=1, e=2)
    seeds = [PopulationState.constant(grid16, 0.0, 0.0), PopulationState.constant(grid16, 1.0, 1.0)]
    rep = classify(p, grid16, seeds=seeds, t_end=5.0)
    assert len(rep.per_seed) == 1 and rep.verdict == "Extinction"


def test_extinction_dichotomy_default_horizon(grid16):
    p = constants(r=1, s=1, a=1, e=2)
    rep = classify(p, grid16, n_seeds=5)
    for rec in rep.per_seed:
        assert rec["norms"][-1] < 1e-3 * rec["norms"][0]


def test_stability_cor1():
    g = build_grid(1.0, 16)
    p = forced()
    pair = principal_eigenpair(p, g)
    seeds = [PopulationState(0.0, 0.1 * pair.phi0[0], 0.1 * pair.phi0[1]), PopulationState.constant(g, 10.0, 10.0)]
    rep = verify_global_stability(p, g, seeds, pair=pair)
    assert rep.hypothesis == "Cor1" and rep.converged
    assert rep.max_pair_distance < 1e-4 and rep.max_attractor_distance < 1e-4


def test_stability_without_interaction(grid16):
    p = constants(r=2, s=1, a=0, e=0.5)
    seeds = [PopulationState.constant(grid16, 0.05, 0.05), PopulationState.constant(grid16, 3.0, 3.0)]
    rep = verify_global_stability(p, grid16, seeds)
    assert rep.converged and rep.hypothesis in ("Cor1", "H2")


def test_stability_label_unverified():
    g = build_grid(1.0, 8)
    m = 400
    r = Separable(3.0, 1 + 0.9 * np.sin(2 * np.pi * np.arange(m) / m))
    p = ModelParams(r=r, s=1, a=0, b=0.2, c=1.0, e=0.2, f=1, g=0, d1=0.1, d2=0.1)
    seeds = [PopulationState.constant(g, 0.5, 0.5), PopulationState.constant(g, 2.0, 2.0)]
    rep = verify_global_stability(p, g, seeds, max_periods=50)
    assert rep.hypothesis == "hypothesis unverified"


def test_stability_shifted_start():
    g = build_grid(1.0, 16)
    p = forced()
    seeds = [PopulationState(0.25, np.full(16, 0.2), np.full(16, 0.2)), PopulationState(0.25, np.full(16, 4.0), np.full(16, 4.0))]
    rep = verify_global_stability(p, g, seeds, t0=0.25)
    assert rep.converged


def test_report_csvs(tmp_path, grid16):
    rep = classify(constants(r=1, s=1, a=0, e=0), grid16, t_end=3.0, n_seeds=2, attractor=False)
    rep.to_csv(tmp_path / "seeds.csv")
    assert (tmp_path / "seeds.csv").read_text().startswith("seed,t,sup_norm,min_floor")
