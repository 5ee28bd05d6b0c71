"""Delayed Kalman filter on the target's pixel position and pixel velocity.

State is ``(u, v, du/dt, dv/dt)`` under a constant-velocity model driven by
white acceleration noise.  The velocity states carry only the image motion
not explained by the camera's own rotation: when the camera angular rate is
supplied to :meth:`DelayedKalmanFilter.predict`, the rotational rows of the
point-feature interaction matrix are applied as a known input.  A history
of post-tick snapshots is kept so that a detection stamped in the past can
be fused at its capture time: the filter
rewinds to the last snapshot at or before the capture time, predicts exactly
to it, applies the update and replays the predictions back to the present,
rewriting the history on the way.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

log = logging.getLogger(__name__)

_H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
_I4 = np.eye(4)
_EPS_T = 1e-9


class DkfParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    q_a: float = Field(400.0, gt=0, description="pixel acceleration PSD, (px/s^2)^2 s")
    r: float = Field(2.25, gt=0, description="measurement variance, px^2")
    init_pos_std: float = Field(10.0, gt=0, description="px")
    init_vel_std: float = Field(100.0, gt=0, description="px/s")


def transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = dt
    F[1, 3] = dt
    return F


def process_noise(dt: float, q_a: float) -> np.ndarray:
    """Discretized continuous white-acceleration noise (exact for any ``dt``)."""
    q11 = q_a * dt ** 3 / 3.0
    q12 = q_a * dt ** 2 / 2.0
    q22 = q_a * dt
    return np.array([
        [q11, 0.0, q12, 0.0],
        [0.0, q11, 0.0, q12],
        [q12, 0.0, q22, 0.0],
        [0.0, q12, 0.0, q22],
    ])


def kf_predict(x: np.ndarray, P: np.ndarray, dt: float, q_a: float) -> tuple[np.ndarray, np.ndarray]:
    F = transition(dt)
    P = F @ P @ F.T + process_noise(dt, q_a)
    return F @ x, 0.5 * (P + P.T)


def rotation_pixel_rate(e_x: float, e_y: float, w_c, f: float) -> tuple[float, float]:
    """Image velocity (px/s) of a feature at ``(e_x, e_y)`` px due to camera rate ``w_c``."""
    ex, ey = e_x / f, e_y / f
    wx, wy, wz = w_c
    du = ex * ey * wx - (1.0 + ex * ex) * wy + ey * wz
    dv = (1.0 + ey * ey) * wx - ex * ey * wy - ex * wz
    return f * du, f * dv


def rotation_flow(x: np.ndarray, w_c, dt: float, f: float, u0: float, v0: float) -> np.ndarray:
    """State increment over ``dt`` caused by camera angular rate ``w_c`` (camera frame)."""
    du, dv = rotation_pixel_rate(x[0] - u0, x[1] - v0, w_c, f)
    return np.array([du * dt, dv * dt, 0.0, 0.0])


def kf_update(x: np.ndarray, P: np.ndarray, z: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    S = _H @ P @ _H.T + r * np.eye(2)
    K = np.linalg.solve(S, _H @ P).T
    x = x + K @ (z - _H @ x)
    A = _I4 - K @ _H
    P = A @ P @ A.T + r * (K @ K.T)
    return x, 0.5 * (P + P.T)


@dataclass
class Snapshot:
    t: float
    x: np.ndarray
    P: np.ndarray
    w_in: tuple | None = None  # camera rate over the interval ending at t


class DelayedKalmanFilter:
    """Latency-compensating pixel tracker.

    ``span`` is how far back (s) delayed detections can still be fused; use
    twice the worst expected latency.  ``camera`` is ``(f_oc, u0, v0)`` and
    is only needed when camera rates are passed to :meth:`predict`.
    """

    def __init__(self, params: DkfParams, span: float, t0: float = 0.0,
                 camera: tuple[float, float, float] | None = None):
        self.params = params
        self.camera = camera
        self.span = max(span, 0.0)
        self.t_est = t0
        self.x: np.ndarray | None = None
        self.P: np.ndarray | None = None
        self.history: list[Snapshot] = []
        self.updates = 0
        self.skipped = 0

    @property
    def initialized(self) -> bool:
        return self.x is not None

    def _propagate(self, x, P, dt, w_in):
        x, P = kf_predict(x, P, dt, self.params.q_a)
        if w_in is not None:
            x = x + rotation_flow(x, w_in, dt, *self.camera)
        return x, P

    def predict(self, dt: float, w_cam=None) -> None:
        """Advance ``dt`` seconds; ``w_cam`` is the mean camera angular rate (rad/s) over it."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if w_cam is not None and self.camera is None:
            raise ValueError("camera intrinsics required for rotation compensation")
        self.t_est += dt
        if self.x is None:
            return
        w_in = None if w_cam is None else tuple(float(c) for c in w_cam)
        self.x, self.P = self._propagate(self.x, self.P, dt, w_in)
        self.history.append(Snapshot(self.t_est, self.x, self.P, w_in))
        self._prune()

    def _prune(self) -> None:
        horizon = self.t_est - self.span
        # keep the newest snapshot at or before the horizon as the rewind anchor
        drop = 0
        while drop + 1 < len(self.history) and self.history[drop + 1].t <= horizon:
            drop += 1
        if drop:
            del self.history[:drop]

    def _initialize(self, z) -> None:
        p = self.params
        x = np.array([z.u, z.v, 0.0, 0.0])
        P = np.diag([p.init_pos_std ** 2] * 2 + [p.init_vel_std ** 2] * 2)
        self.history = [Snapshot(z.t_capture, x, P)]
        if self.t_est - z.t_capture > _EPS_T:
            # rotation since capture is not known here; the next updates absorb it
            x, P = kf_predict(x, P, self.t_est - z.t_capture, p.q_a)
            self.history.append(Snapshot(self.t_est, x, P))
        self.x, self.P = x, P

    def update_delayed(self, z) -> bool:
        """Fuse a (valid) detection captured at ``z.t_capture``.

        Returns False when the detection is older than the stored history;
        the state is left untouched and ``skipped`` is incremented.
        """
        if not z.valid:
            return False
        if z.t_capture > self.t_est + _EPS_T:
            raise ValueError("detection captured after the current filter time")
        if self.x is None:
            self._initialize(z)
            self.updates += 1
            return True
        times = [s.t for s in self.history]
        k = bisect.bisect_right(times, z.t_capture + _EPS_T) - 1
        if k < 0:
            self.skipped += 1
            log.debug("delayed detection at t=%.3f older than history", z.t_capture)
            return False

        anchor = self.history[k]
        replay = self.history[k + 1:]
        x, P = anchor.x, anchor.P
        tc = z.t_capture
        if tc - anchor.t > _EPS_T:
            # the capture splits the next interval; both parts see its input
            w_in = replay[0].w_in if replay else None
            x, P = self._propagate(x, P, tc - anchor.t, w_in)
            new_hist = self.history[:k + 1]
        else:
            tc, w_in = anchor.t, anchor.w_in
            new_hist = self.history[:k]
        x, P = kf_update(x, P, np.array([z.u, z.v]), self.params.r)
        new_hist.append(Snapshot(tc, x, P, w_in))

        t_prev = tc
        for snap in replay:
            x, P = self._propagate(x, P, snap.t - t_prev, snap.w_in)
            new_hist.append(Snapshot(snap.t, x, P, snap.w_in))
            t_prev = snap.t
        self.history = new_hist
        self.x, self.P = x, P
        self.updates += 1
        return True

    def estimate(self, u0: float, v0: float) -> tuple[float, float, float, float]:
        """Current-time ``(e_x, e_y, de_x/dt, de_y/dt)`` relative to the principal point."""
        if self.x is None:
            raise RuntimeError("filter has not received a detection yet")
        x = self.x
        return float(x[0] - u0), float(x[1] - v0), float(x[2]), float(x[3])

    def covariance_ok(self, tol: float = 1e-9) -> bool:
        if self.P is None:
            return True
        return (np.abs(self.P - self.P.T).max() <= tol
                and float(np.linalg.eigvalsh(self.P).min()) >= -tol)
