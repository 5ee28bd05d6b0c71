import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ibvs_intercept.guidance import (
    GuidanceParams, GuidanceState, LosAngles, VelocityAngles, desired_velocity,
    direction_from_angles, dynamics_los_bound, los_angles, los_rate, png_step,
    pursuit_guidance, speed_schedule, velocity_angles, wrap_pi,
)

G = GuidanceParams()


def test_los_angle_examples():
    assert los_angles((0, 1, 0))[:2] == (0.0, 0.0)
    c, s = math.cos(math.radians(30)), math.sin(math.radians(30))
    q = los_angles((0, c, s))
    assert math.isclose(q.q_y, 0.5236, abs_tol=1e-4) and q.q_z == 0
    c, s = math.cos(math.radians(20)), math.sin(math.radians(20))
    q = los_angles((s, c, 0))
    assert math.isclose(q.q_z, 0.3491, abs_tol=1e-4) and q.q_y == 0


def test_velocity_angle_examples():
    assert velocity_angles((0, 1, 0))[:2] == (0.0, 0.0)
    prev = VelocityAngles(0.1, 0.2, True)
    held = velocity_angles((0, 0, 0), prev)
    assert held[:2] == (0.1, 0.2) and not held.in_domain
    c, s = math.cos(math.radians(10)), math.sin(math.radians(10))
    assert math.isclose(velocity_angles((0, c, -s)).sigma_y, -0.1745, abs_tol=1e-4)


@given(st.floats(-1.5, 1.5), st.floats(-3.1, 3.1))
def test_angles_round_trip(el, az):
    n = direction_from_angles(el, az)
    assert abs(np.linalg.norm(n) - 1) <= 1e-12
    q = los_angles(n)
    assert math.isclose(q.q_y, el, abs_tol=1e-9) and math.isclose(q.q_z, az, abs_tol=1e-9)


def test_png_examples():
    gs = GuidanceState()
    q0 = LosAngles(0.0, 0.0, True)
    s0 = VelocityAngles(0.1, -0.2, True)
    assert png_step(gs, q0, s0, G) == (0.1, -0.2)      # first call passes through
    out = png_step(gs, LosAngles(0.01, 0.0, True), s0, G)
    assert math.isclose(out[0], 0.13) and math.isclose(out[1], -0.2)


@pytest.mark.parametrize("memory", ["current", "measured", "commanded"])
def test_png_fixed_point(memory):
    params = G.model_copy(update={"sigma_memory": memory})
    gs = GuidanceState()
    q = LosAngles(0.3, -0.7, True)
    s = VelocityAngles(0.25, -0.65, True)
    outs = [png_step(gs, q, s, params) for _ in range(5)]
    assert all(o == outs[0] for o in outs)


def test_png_memory_variants():
    q0, q1 = LosAngles(0.0, 0.0, True), LosAngles(0.01, 0.0, True)
    s0, s1 = VelocityAngles(0.1, 0.0, True), VelocityAngles(0.12, 0.0, True)
    res = {}
    for m in ("current", "measured", "commanded"):
        gs = GuidanceState()
        p = G.model_copy(update={"sigma_memory": m})
        png_step(gs, q0, s0, p)
        res[m] = png_step(gs, q1, s1, p)[0]
    assert math.isclose(res["current"], 0.15)
    assert math.isclose(res["measured"], 0.13)
    assert math.isclose(res["commanded"], 0.13)


def test_png_wraps_azimuth():
    gs = GuidanceState()
    s = VelocityAngles(0.0, 3.1, True)
    png_step(gs, LosAngles(0.0, 3.13, True), s, G)
    out = png_step(gs, LosAngles(0.0, -3.13, True), s, G)
    assert math.isclose(out[1], 3.1 + 3 * wrap_pi(-3.13 - 3.13), rel_tol=1e-12)
    assert abs(out[1] - 3.1) < 0.1


def test_png_dq_override():
    gs = GuidanceState()
    s = VelocityAngles(0.0, 0.0, True)
    png_step(gs, LosAngles(0, 0, True), s, G)
    assert png_step(gs, LosAngles(1, 1, True), s, G, dq=(0.01, -0.02)) == pytest.approx((0.03, -0.06))


def test_desired_velocity_examples():
    assert np.allclose(desired_velocity(0, 0, 5), (0, 5, 0))
    assert np.allclose(desired_velocity(math.pi / 2 - 1e-9, 0, 1), (0, 0, 1), atol=1e-8)
    assert math.isclose(np.linalg.norm(desired_velocity(0.3, -0.2, 4)), 4, rel_tol=0, abs_tol=1e-12)
    with pytest.raises(ValueError):
        desired_velocity(0, 0, -1)


def test_speed_schedule_examples():
    assert speed_schedule(0.0, G) == 2.0
    assert speed_schedule(G.v_cap, G) == G.v_cap
    assert speed_schedule(7.5, G) == G.v_cap
    with pytest.raises(ValueError):
        speed_schedule(-1.0, G)


@given(st.floats(0, 20), st.floats(1e-3, 0.05))
def test_speed_schedule_rate_limited(v, dt):
    v_d = speed_schedule(v, G, dt)
    assert v_d - v <= G.k_a / G.ramp_period * dt + 1e-12
    if v <= G.v_cap:
        assert v <= v_d <= G.v_cap


def test_speed_schedule_reaches_cap():
    v, dt = 0.0, 0.01
    for _ in range(2000):
        v = speed_schedule(v, G, dt)
    assert math.isclose(v, G.v_cap, rel_tol=1e-3)


def test_dynamics_los_bound():
    assert math.isclose(dynamics_los_bound(2.0), math.atan(2 / 9.8))
    assert math.isclose(dynamics_los_bound(2.0), 0.2013, abs_tol=5e-5)


def test_pursuit_examples():
    assert np.allclose(pursuit_guidance((0, 1, 0), 3), (0, 3, 0))


@given(st.floats(0, 20))
def test_pursuit_norm(v):
    n = direction_from_angles(0.2, -0.4)
    assert math.isclose(np.linalg.norm(pursuit_guidance(n, v)), v, abs_tol=1e-12)


def test_los_rate():
    assert math.isclose(los_rate((0, 10, 0), (1, 0, 0)), 0.1)
    assert los_rate((0, 10, 0), (0, -3, 0)) == 0


def test_recommended_range_warnings():
    with pytest.warns(UserWarning):
        GuidanceParams(K_y=1.0)
    with pytest.warns(UserWarning):
        GuidanceParams(k_a=5.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        GuidanceParams()
