import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ibvs_intercept.dynamics import VehicleState
from ibvs_intercept.sensor import (
    CameraIntrinsics, LatencyQueue, PixelObservation, add_pixel_noise, camera_point, camera_tick,
    drop_frame, los_from_pixels, project,
)
from conftest import random_rotation

CAM = CameraIntrinsics()


def _vehicle(R=None):
    return VehicleState.at_rest((0, 0, 0), R=R)


def test_default_intrinsics_consistent():
    assert math.isclose(math.tan(CAM.vfov / 2), CAM.height / 2 / CAM.f_oc, rel_tol=0.01)
    with pytest.raises(ValueError):
        CameraIntrinsics(vfov=0.5)
    with pytest.raises(ValueError):
        CameraIntrinsics(unknown=1)


def test_target_on_axis_hits_principal_point():
    for depth in (0.5, 10, 1e4):
        obs = project((0, depth, 0), _vehicle(), CAM, 0.0)
        assert obs.valid and obs.u == CAM.u0 and obs.v == CAM.v0 and obs.e_x == obs.e_y == 0


def test_behind_camera_invalid():
    assert not project((0, -5, 0), _vehicle(), CAM, 0.0).valid


def test_pinhole_arithmetic():
    cam = CameraIntrinsics(f_oc=400, u0=320, v0=240, width=640, height=480,
                           vfov=2 * math.atan(240 / 400))
    # camera (1, 0, 2) = body (1, 2, 0) for the forward mount
    assert np.allclose(camera_point((1, 2, 0), np.zeros(3), np.eye(3), cam.R_cb), (1, 0, 2))
    obs = project((1, 2, 0), _vehicle(), cam, 0.0)
    assert (obs.u, obs.v) == (520, 240)


def test_image_down_is_earth_down():
    obs = project((0, 10, -1), _vehicle(), CAM, 0.0)
    assert obs.e_y > 0 and obs.e_x == 0


def test_validity_is_exact_bounds_check():
    f = CAM.f_oc
    inside = project((CAM.u0 / f * 10 - 1e-6, 10, 0), _vehicle(), CAM, 0.0)
    outside = project((CAM.u0 / f * 10 + 1e-6, 10, 0), _vehicle(), CAM, 0.0)
    assert inside.valid and not outside.valid


def test_noise_identity_and_statistics(rng):
    obs = PixelObservation.make(100.0, 100.0, 0.0, True, CAM)
    assert add_pixel_noise(obs, 0.0, rng, CAM) is obs
    us = [add_pixel_noise(obs, 2.0, rng, CAM).u for _ in range(10_000)]
    assert 1.9 <= np.std(us) <= 2.1
    edge = PixelObservation.make(0.001, 100.0, 0.0, True, CAM)
    assert any(not add_pixel_noise(edge, 2.0, rng, CAM).valid for _ in range(20))
    with pytest.raises(ValueError):
        add_pixel_noise(obs, -1.0, rng, CAM)


def test_los_examples():
    assert np.allclose(los_from_pixels(0, 0, CAM.f_oc, np.eye(3), CAM.R_cb), (0, 1, 0))
    n = los_from_pixels(CAM.f_oc, 0, CAM.f_oc, np.eye(3), CAM.R_cb)
    assert np.allclose(n, (math.sqrt(0.5), math.sqrt(0.5), 0))


def test_projection_round_trip(rng):
    done = 0
    while done < 1000:
        R = random_rotation(rng)
        veh = VehicleState.at_rest(rng.normal(0, 5, 3), R=R)
        d = rng.uniform(1, 40)
        ray = np.array([rng.uniform(-0.9, 0.9) * CAM.u0, rng.uniform(-0.9, 0.9) * CAM.v0, CAM.f_oc])
        n_true = R @ CAM.R_cb @ (ray / np.linalg.norm(ray))
        obs = project(veh.p + d * n_true, veh, CAM, 0.0)
        assert obs.valid
        n = los_from_pixels(obs.e_x, obs.e_y, CAM.f_oc, R, CAM.R_cb)
        assert abs(np.linalg.norm(n) - 1) <= 1e-12
        assert math.acos(min(1.0, float(n @ n_true))) <= 1e-6
        done += 1


def test_latency_zero_delivers_current_frame():
    q = LatencyQueue(100.0, 0.0)
    for k in range(50):
        t = k / 100
        obs = camera_tick(q, t, lambda tc: PixelObservation.make(1, 1, tc, True, CAM))
        assert obs is not None and obs.t_capture == t


def test_latency_queue_delay_and_rate():
    q = LatencyQueue(30.0, 0.1)
    got = []
    for k in range(1001):
        t = k / 100
        obs = camera_tick(q, t, lambda tc: PixelObservation.make(1, 1, tc, True, CAM))
        if obs is not None:
            got.append((t, obs.t_capture))
    assert got[0][1] == 0.0 and math.isclose(got[0][0], 0.1)
    caps = [c for _, c in got]
    assert caps == sorted(caps)                       # FIFO
    assert all(t >= c + 0.1 - 1e-9 for t, c in got)  # causal
    in_window = [c for t, c in got if 1.0 <= t < 9.0]
    assert len(in_window) == 8 * 30
    assert np.allclose(np.diff(caps), 1 / 30, atol=0.011)  # none dropped


def test_camera_tick_time_monotone():
    q = LatencyQueue(30.0, 0.0)
    camera_tick(q, 1.0, lambda tc: PixelObservation.make(1, 1, tc, True, CAM))
    with pytest.raises(ValueError):
        camera_tick(q, 0.5, lambda tc: PixelObservation.make(1, 1, tc, True, CAM))


def test_drop_frame():
    obs = PixelObservation.make(1, 1, 0.0, True, CAM)
    assert not drop_frame(obs).valid


@given(st.floats(-CAM.u0, CAM.u0), st.floats(-CAM.v0, CAM.v0))
def test_los_unit_norm(ex, ey):
    n = los_from_pixels(ex, ey, CAM.f_oc, np.eye(3), CAM.R_cb)
    assert abs(np.linalg.norm(n) - 1) <= 1e-12
