import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ibvs_intercept.dynamics import (
    MotionModel, SimulationDiverged, TargetDrift, VehicleParams, VehicleState, WindField,
    WindModel, relative_state, step_target, step_vehicle,
)
from ibvs_intercept.mathcore import is_rotation, yaw_pitch_roll

P = VehicleParams()


def test_hover_is_equilibrium():
    s = VehicleState.at_rest((0, 0, 10))
    for _ in range(500):
        s = step_vehicle(s, P.mass * 9.8, np.zeros(3), P, 0.002)
        assert np.abs(s.v).max() <= 1e-9
    assert np.allclose(s.p, (0, 0, 10), atol=1e-9)


def test_free_fall_matches_ballistic_solution():
    s = VehicleState.at_rest((0, 0, 100), v=(1.0, -2.0, 3.0))
    for _ in range(1000):
        s = step_vehicle(s, 0.0, np.zeros(3), P, 0.001)
    t = 1.0
    assert math.isclose(s.v[2], 3.0 - 9.8 * t, abs_tol=1e-6)
    expect = np.array([1.0 * t, -2.0 * t, 100 + 3.0 * t - 0.5 * 9.8 * t * t])
    assert np.allclose(s.p, expect, atol=1e-6)


def test_constant_yaw_rate_closed_form():
    params = VehicleParams(tau_w=0.0)
    s = VehicleState.at_rest((0, 0, 10))
    for _ in range(1000):
        s = step_vehicle(s, params.mass * 9.8, np.array([0.0, 0.0, 1.0]), params, 0.001)
    assert math.isclose(yaw_pitch_roll(s.R)[0], 1.0, abs_tol=1e-9)
    assert is_rotation(s.R, 1e-8)


def test_rate_lag_first_order():
    s = VehicleState.at_rest((0, 0, 10))
    s = step_vehicle(s, 14.7, np.array([1.0, 0, 0]), P, P.tau_w / 5)
    assert math.isclose(s.w[0], 1 - math.exp(-0.2), rel_tol=1e-12)


def test_rotation_stays_on_so3_long_run(rng):
    s = VehicleState.at_rest((0, 0, 1e3))
    cmds = rng.uniform(-3, 3, (100_000, 3))
    for w in cmds:
        s = step_vehicle(s, P.mass * 9.8, w, P, 0.002)
    assert is_rotation(s.R, 1e-8)


def test_speed_limit_and_bad_dt():
    s = VehicleState.at_rest((0, 0, 10), v=(0, 30, 0))
    s = step_vehicle(s, 14.7, np.zeros(3), P, 0.002)
    assert np.linalg.norm(s.v) <= P.v_max + 1e-12
    with pytest.raises(ValueError):
        step_vehicle(s, 14.7, np.zeros(3), P, 0.05)


def test_non_finite_state_raises():
    s = VehicleState.at_rest((0, 0, 10))
    with pytest.raises(SimulationDiverged):
        step_vehicle(s, math.nan, np.zeros(3), P, 0.002)


def test_cannot_hover_rejected():
    with pytest.raises(ValueError):
        VehicleParams(mass=2.0, f_max=10.0)


def test_target_examples():
    ca = MotionModel(kind="ca", p0=(0, 0, 0), accel=(0.8, 0, 0.2))
    assert np.allclose(step_target(ca, 1.0).p, (0.4, 0, 0.1))
    sm = MotionModel(kind="sm", p0=(0, 0, 0))
    assert np.allclose(step_target(sm, 3.5).p, (2.0, 10.5, 0), atol=1e-12)
    st_ = MotionModel(kind="static", p0=(1, 2, 3))
    tgt = step_target(st_, 17.0)
    assert np.array_equal(tgt.p, (1, 2, 3)) and not tgt.v.any()
    with pytest.raises(ValueError):
        step_target(st_, -1.0)


@pytest.mark.parametrize("kind", ["cv", "ca", "sm"])
def test_target_velocity_is_derivative(kind):
    m = MotionModel(kind=kind, velocity=(1, -1, 0.5), accel=(0.8, 0, 0.2))
    h = 1e-6
    for t in (0.5, 2.0, 7.3):
        fd = (step_target(m, t + h).p - step_target(m, t - h).p) / (2 * h)
        assert np.allclose(fd, step_target(m, t).v, atol=1e-6)


@given(st.lists(st.floats(0, 50), min_size=1, max_size=10), st.floats(0, 50))
def test_target_is_stateless(queries, t):
    m = MotionModel(kind="sm")
    direct = step_target(m, t).p
    for q in queries:
        step_target(m, q)
    assert np.array_equal(step_target(m, t).p, direct)


def test_relative_examples():
    veh = VehicleState.at_rest((0, 0, 0))
    tgt = step_target(MotionModel(kind="static", p0=(0, 0, 0)), 0)
    assert relative_state(veh, tgt).intercepted
    veh = VehicleState.at_rest((0, 0, 0), v=(0, 2, 0))
    tgt = step_target(MotionModel(kind="static", p0=(0, 10, 0)), 0)
    rel = relative_state(veh, tgt)
    assert rel.range == 10 and rel.closing_rate == -2 and not rel.intercepted


def test_closing_rate_finite_difference(rng):
    for _ in range(100):
        p, v = rng.normal(0, 10, 3), rng.normal(0, 3, 3)
        tp, tv = rng.normal(0, 10, 3), rng.normal(0, 3, 3)
        h = 1e-6

        def rel(dt):
            veh = VehicleState.at_rest(p + v * dt, v=v)
            m = MotionModel(kind="cv", p0=tuple(tp), velocity=tuple(tv))
            return relative_state(veh, step_target(m, dt))
        r0 = rel(0.0)
        fd = (rel(h).range - r0.range) / h
        assert abs(fd - r0.closing_rate) <= 1e-4 * max(1.0, abs(r0.closing_rate))


def test_wind_zero_gust_is_deterministic():
    w = WindField(WindModel(mean=(1, 0, 0)))
    a = np.random.default_rng(1)
    w.advance(0.01, a)
    assert np.array_equal(w.air_velocity, (1, 0, 0))


def test_gust_statistics():
    w = WindField(WindModel(gust_std=0.5, corr_time=0.2))
    rng = np.random.default_rng(3)
    xs = []
    for _ in range(20000):
        w.advance(0.05, rng)
        xs.append(w.gust[0])
    assert 0.45 < np.std(xs) < 0.55


def test_target_drift_follows_wind():
    model = WindModel(mean=(2, 0, 0), drag_target=1.0, tether_stiffness=1.0)
    d = TargetDrift(model)
    for _ in range(5000):
        d.advance(0.01, np.array([2.0, 0, 0]))
    # steady state of c(w - r) = k x with r = 0 is x = c w / k
    assert np.allclose(d.offset, (2, 0, 0), atol=1e-2)
