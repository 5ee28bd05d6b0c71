"""Two-plane proportional navigation and the pursuit-guidance baseline.

Angles follow the earth-frame ENU convention: elevation is measured from
the horizontal plane (up positive) and azimuth from north toward east, so
a direction is ``(cos e sin a, cos e cos a, sin e)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .mathcore import GRAVITY


class GuidanceParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    K_y: float = Field(3.0, gt=0, description="vertical-plane navigation constant")
    K_z: float = Field(3.0, gt=0, description="horizontal-plane navigation constant")
    k_a: float = Field(2.0, ge=0, description="speed gain, m/s per ramp period")
    ramp_period: float = Field(1.0, gt=0, description="time over which k_a is added, s")
    v_cap: float = Field(8.0, gt=0, description="speed ceiling, m/s")
    cap_tau: float = Field(1.5, gt=0, description="time constant of the approach to v_cap, s")
    min_speed: float = Field(0.3, ge=0, description="below this the velocity angles are held, m/s")
    sigma_memory: Literal["current", "measured", "commanded"] = "current"

    @model_validator(mode="after")
    def _recommended_ranges(self) -> "GuidanceParams":
        for name in ("K_y", "K_z"):
            K = getattr(self, name)
            if not 2.0 <= K <= 6.0:
                warnings.warn(f"{name}={K} outside the recommended range [2, 6]", stacklevel=2)
        if not 1.0 <= self.k_a <= 3.0:
            warnings.warn(f"k_a={self.k_a} outside the recommended range [1, 3]", stacklevel=2)
        return self


class LosAngles(NamedTuple):
    q_y: float
    q_z: float
    in_domain: bool


class VelocityAngles(NamedTuple):
    sigma_y: float
    sigma_z: float
    in_domain: bool


def _plane_angles(n, prev_z: float) -> tuple[float, float, bool]:
    nx, ny, nz = float(n[0]), float(n[1]), float(n[2])
    horiz = math.hypot(nx, ny)
    elev = math.atan2(nz, horiz)
    if horiz == 0.0:
        return elev, prev_z, False
    return elev, math.atan2(nx, ny), ny > 0.0


def los_angles(n_t, prev: LosAngles | None = None) -> LosAngles:
    """Vertical (``q_y``) and horizontal (``q_z``) LOS angles of a unit LOS vector."""
    return LosAngles(*_plane_angles(n_t, prev.q_z if prev else 0.0))


def velocity_angles(v, prev: VelocityAngles | None = None, min_speed: float = 1e-9) -> VelocityAngles:
    """Velocity angles of ``v``; below ``min_speed`` the previous angles are held and flagged."""
    v = np.asarray(v, dtype=float)
    speed = math.sqrt(float(v @ v))
    if speed <= min_speed:
        if prev is None:
            return VelocityAngles(0.0, 0.0, False)
        return VelocityAngles(prev.sigma_y, prev.sigma_z, False)
    return VelocityAngles(*_plane_angles(v / speed, prev.sigma_z if prev else 0.0))


def wrap_pi(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass
class GuidanceState:
    """One-sample memory for the discrete PN law."""

    q_y: float = 0.0
    q_z: float = 0.0
    sigma_y: float = 0.0
    sigma_z: float = 0.0
    initialized: bool = False

    def reset(self) -> None:
        self.initialized = False


def png_step(gs: GuidanceState, q: LosAngles, sigma: VelocityAngles,
             params: GuidanceParams, dq: tuple[float, float] | None = None) -> tuple[float, float]:
    """Desired velocity angles ``sigma_d = K (q_k - q_{k-1}) + sigma_{k-1}`` per plane.

    The first call passes ``sigma`` through and seeds the memory.  The base
    angle ``sigma_{k-1}`` depends on ``params.sigma_memory``:

    ``"current"``
        the velocity angle sampled at this tick (the newest velocity, i.e. the
        state reached at the end of the previous step).  The lateral demand is
        then ``K v dq/dt`` and the effective navigation constant is ``K``.
    ``"measured"``
        the velocity angle stored one tick earlier.  The vehicle's own turn
        during the tick is subtracted, which halves the effective constant.
    ``"commanded"``
        the previous output, so the law integrates ``d(sigma) = K dq``.

    ``dq`` overrides the LOS increment ``q_k - q_{k-1}`` when the caller has
    a smoother estimate of it (for example from a filtered LOS rate).
    """
    if not gs.initialized:
        gs.q_y, gs.q_z = q.q_y, q.q_z
        gs.sigma_y, gs.sigma_z = sigma.sigma_y, sigma.sigma_z
        gs.initialized = True
        return sigma.sigma_y, sigma.sigma_z
    if params.sigma_memory == "current":
        base_y, base_z = sigma.sigma_y, sigma.sigma_z
    else:
        base_y, base_z = gs.sigma_y, gs.sigma_z
    if dq is None:
        dq = (q.q_y - gs.q_y, wrap_pi(q.q_z - gs.q_z))
    s_yd = params.K_y * dq[0] + base_y
    s_zd = params.K_z * dq[1] + base_z
    gs.q_y, gs.q_z = q.q_y, q.q_z
    if params.sigma_memory == "commanded":
        gs.sigma_y, gs.sigma_z = s_yd, s_zd
    else:
        gs.sigma_y, gs.sigma_z = sigma.sigma_y, sigma.sigma_z
    return s_yd, s_zd


def direction_from_angles(elev: float, azim: float) -> np.ndarray:
    ce = math.cos(elev)
    return np.array([ce * math.sin(azim), ce * math.cos(azim), math.sin(elev)])


def desired_velocity(sigma_yd: float, sigma_zd: float, v_d: float) -> np.ndarray:
    if v_d < 0.0:
        raise ValueError("v_d must be non-negative")
    return v_d * direction_from_angles(sigma_yd, sigma_zd)


def speed_schedule(v_now: float, params: GuidanceParams, dt: float | None = None) -> float:
    """Speed ramp ``v_d = v_now + k_a`` capped at ``v_cap``.

    Without ``dt`` the full increment is applied in one step.  With the
    guidance tick ``dt`` the increment is spread over ``ramp_period`` and the
    ceiling is approached with time constant ``cap_tau``, so the commanded
    tangential acceleration never exceeds ``k_a / ramp_period`` and fades out
    instead of switching off when ``v_cap`` is reached.
    """
    if v_now < 0.0:
        raise ValueError("v_now must be non-negative")
    if dt is None:
        return min(v_now + params.k_a, params.v_cap)
    rate = min(params.k_a / params.ramp_period, (params.v_cap - v_now) / params.cap_tau)
    return max(v_now + rate * dt, 0.0)


def dynamics_los_bound(k_a: float, g: float = GRAVITY) -> float:
    """Largest pitch-induced LOS change produced by the speed ramp: arctan(k_a / g)."""
    return math.atan(k_a / g)


def pursuit_guidance(n_t, v_d: float) -> np.ndarray:
    """Baseline: fly straight down the instantaneous line of sight."""
    return v_d * np.asarray(n_t, dtype=float)


def los_rate(p_r, v_r) -> float:
    """Magnitude of the LOS angular rate ``|p_r x v_r| / |p_r|^2``."""
    p_r = np.asarray(p_r, dtype=float)
    r2 = float(p_r @ p_r)
    if r2 == 0.0:
        return 0.0
    return float(np.linalg.norm(np.cross(p_r, v_r))) / r2
