import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import constants
from oracles import kinetic_equilibrium, kinetic_rhs, rk4_kinetic
from stagepop import (
    PopulationState,
    SpatialProfile,
    build_grid,
    integrate,
    linear_propagate,
    max_stable_dt,
    step,
)
from stagepop.exceptions import PositivityError, StepSizeError


def test_zero_is_fixed(grid16):
    p = constants()
    out = step(PopulationState.constant(grid16, 0.0, 0.0), p, 0.01, grid16)
    assert out.norm == 0.0 and out.t == pytest.approx(0.01)


def test_constant_state_matches_kinetic_step(grid16):
    # the same semi-implicit update on the 2-component ODE, by hand
    co = dict(r=2.0, s=1.0, a=0.3, b=1.0, c=0.2, e=0.5, f=1.0, g=0.1)
    p = constants(**co)
    u1, u2, dt = 0.4, 0.9, 0.05
    loss1 = co["s"] + co["a"] + co["b"] * u1 + co["c"] * u2
    loss2 = co["e"] + co["f"] * u2 + co["g"] * u1
    exp1 = (u1 + dt * co["r"] * u2) / (1 + dt * loss1)
    exp2 = (u2 + dt * co["s"] * u1) / (1 + dt * loss2)
    out = step(PopulationState.constant(grid16, u1, u2), p, dt, grid16)
    np.testing.assert_allclose(out.u1, exp1, rtol=1e-13)
    np.testing.assert_allclose(out.u2, exp2, rtol=1e-13)


def test_step_residual_near_equilibrium(grid16):
    u1, u2 = kinetic_equilibrium(2, 1, 0, 0.5, 1, 1)
    p = constants(r=2, s=1, a=0, e=0.5)
    dt = 0.01
    out = step(PopulationState.constant(grid16, u1, u2), p, dt, grid16)
    assert max(np.abs(out.u1 - u1).max(), np.abs(out.u2 - u2).max()) <= 1e-4 * dt


def test_step_rejects_large_dt(grid16):
    p = constants()
    with pytest.raises(StepSizeError):
        step(PopulationState.constant(grid16, 1.0, 1.0), p, 10.0, grid16)


def test_step_rejects_negative_state(grid16):
    st_ = PopulationState(0.0, -np.ones(16), np.ones(16))
    with pytest.raises(PositivityError):
        step(st_, constants(), 0.01, grid16)


def test_integrate_zero(grid16):
    tr = integrate(PopulationState.constant(grid16, 0.0, 0.0), constants(), grid16, 2.0, 0.01)
    assert np.all(tr.sup_norms() == 0.0)


def test_integrate_matches_rk4_oracle(grid16):
    co = dict(r=2.0, s=1.0, a=0.0, b=1.0, c=0.3, e=0.5, f=1.0, g=0.2)
    p = constants(**co)
    dt = 1e-2
    tr = integrate(PopulationState.constant(grid16, 0.1, 2.0), p, grid16, 10.0, dt)
    ref = rk4_kinetic(kinetic_rhs(**co), [0.1, 2.0], 10.0, dt / 100)
    err = max(np.abs(tr.final.u1 - ref[0]).max(), np.abs(tr.final.u2 - ref[1]).max())
    assert err <= 1e-4


def test_integrate_respects_bound(grid16):
    p = constants(r=1, s=1, a=0, e=0)
    tr = integrate(PopulationState.constant(grid16, 5.0, 5.0), p, grid16, 5.0, 0.01, record_all=True)
    assert tr.sup_norms().max() <= 5.0 * (1 + 1e-12)


def test_trajectory_records_endpoints(grid16):
    tr = integrate(PopulationState.constant(grid16, 1.0, 1.0), constants(), grid16, 2.5, 0.01)
    assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(2.5)
    np.testing.assert_allclose(np.diff(tr.times[:3]), 1.0)


def test_strict_positivity_after_one_step():
    g = build_grid(1.0, 20)
    u1 = np.zeros(20)
    u1[7] = 1.0
    out = step(PopulationState(0.0, u1, np.zeros(20)), constants(), 0.01, g)
    assert out.u1.min() > 0 and out.u2.min() > 0


def test_linear_propagate_zero(grid16):
    v1, v2 = linear_propagate((np.zeros(16), np.zeros(16)), constants(), grid16, 0.0, 1.0, 0.01)
    assert not v1.any() and not v2.any()


def test_linear_propagate_decay_rate(grid16):
    p = constants(r=1, s=1, a=1, e=2)
    dt = 1e-3
    v1, v2 = linear_propagate((np.ones(16), np.ones(16)), p, grid16, 0.0, 5.0, dt)
    # coupling is explicit: one step multiplies (1, 1) by (1 + dt)/(1 + 2 dt)
    expected = ((1.0 + dt) / (1.0 + 2.0 * dt)) ** round(5.0 / dt)
    np.testing.assert_allclose(v1, expected, rtol=1e-9)
    # first-order rate bias is about 1.5 dt
    assert abs(np.log(v1[0]) / 5.0 + 1.0) < 5e-3


def test_linear_propagate_index_positivity():
    g = build_grid(1.0, 12)
    e0 = np.zeros(12)
    e0[3] = 1.0
    v1, v2 = linear_propagate((e0, np.zeros(12)), constants(), g, 0.0, 0.01, 0.01)
    assert v1.min() > 0 and v2.min() > 0


def test_max_stable_dt_formula(grid16):
    p = constants(r=1, s=1, a=0, b=0, c=0, e=0, f=0, g=0)
    assert max_stable_dt(p, 0.0) == pytest.approx(1 / 3)
    p2 = constants(r=2, s=2, a=2, b=2, c=2, e=2, f=2, g=2)
    p1 = constants(r=1, s=1, a=1, b=1, c=1, e=1, f=1, g=1)
    assert 1 / max_stable_dt(p2, 1.0) - 1 == pytest.approx(2 * (1 / max_stable_dt(p1, 1.0) - 1))


@settings(max_examples=25, deadline=None)
@given(
    vals=st.lists(st.floats(0.0, 5.0), min_size=8, max_size=8),
    seed=st.integers(0, 2**31),
)
def test_random_steps_stay_nonnegative(vals, seed):
    r, s, a, b, c, e, f, g = vals
    p = constants(r=r + 0.1, s=s + 0.1, a=a, b=b + 0.1, c=c, e=e, f=f + 0.1, g=g)
    grid = build_grid(1.0, 8)
    rng = np.random.default_rng(seed)
    u0 = PopulationState(0.0, rng.uniform(0, 2, 8), rng.uniform(0, 2, 8))
    dt = max_stable_dt(p, max(u0.norm, p.density_bound()))
    tr = integrate(u0, p, grid, 400 * dt, dt, record_all=True)
    assert min(tr.floors()) >= 0


def test_spatial_heterogeneity_positive_long_run():
    g = build_grid(1.0, 32)
    p = constants(r=SpatialProfile(1.0 + 0.5 * np.sin(np.pi * g.nodes)), a=0.0, e=0.2, d1=0.01, d2=0.01)
    tr = integrate(PopulationState.constant(g, 0.01, 0.01), p, g, 10.0, 0.02, record_all=True)
    assert tr.floors()[1:].min() > 0


def test_trajectory_csv(tmp_path, grid16):
    tr = integrate(PopulationState.constant(grid16, 1.0, 1.0), constants(), grid16, 1.0, 0.1)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,node_index,x,u1,u2"
    assert len(lines) == 1 + len(tr.snapshots) * 16
