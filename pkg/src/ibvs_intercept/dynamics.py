"""Interceptor and target propagation.

The interceptor uses the translational point-mass model with a thrust vector
along body +z.  Moment dynamics are replaced by a first-order body-rate
tracking lag (the inner autopilot loop), and attitude is advanced on SO(3)
with the exponential map so it never leaves the rotation group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .mathcore import GRAVITY, GRAVITY_E, expm_so3

Vec3 = tuple[float, float, float]


class SimulationDiverged(RuntimeError):
    """Raised when propagation produces non-finite state."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class VehicleParams(_Model):
    mass: float = Field(1.5, gt=0, description="kg")
    f_max: float = Field(3.0 * 1.5 * GRAVITY, gt=0, description="maximum lift, N")
    w_max: float = Field(3.0, gt=0, description="maximum body rate norm, rad/s")
    tau_w: float = Field(0.05, ge=0, description="body-rate tracking time constant, s")
    v_max: float = Field(12.0, gt=0, description="airframe speed limit, m/s")
    a_max: float = Field(5.0, gt=0, description="commanded acceleration limit, m/s^2")

    @model_validator(mode="after")
    def _can_hover(self) -> "VehicleParams":
        if self.f_max / self.mass < GRAVITY:
            raise ValueError("f_max / mass must be at least g (vehicle cannot hover)")
        return self


class WindModel(_Model):
    """Mean wind plus first-order Gauss-Markov gusts, coupled through linear drag."""

    mean: Vec3 = (0.0, 0.0, 0.0)
    gust_std: float = Field(0.0, ge=0, description="m/s")
    corr_time: float = Field(2.0, gt=0, description="s")
    drag_vehicle: float = Field(0.0, ge=0, description="1/s")
    drag_target: float = Field(0.0, ge=0, description="1/s")
    tether_stiffness: float = Field(1.0, ge=0, description="target restoring term, 1/s^2")

    @property
    def active(self) -> bool:
        return self.drag_vehicle > 0.0 or self.drag_target > 0.0


class MotionModel(_Model):
    """Closed-form target kinematics: static, CV, CA or sinusoidal maneuver (SM).

    SM: ``p0 + (amplitude*sin(2*pi*t/period), drift*t, 0)``.
    """

    kind: Literal["static", "cv", "ca", "sm"] = "static"
    p0: Vec3 = (0.0, 20.0, 10.0)
    velocity: Vec3 = (0.0, 0.0, 0.0)
    accel: Vec3 = (0.0, 0.0, 0.0)
    amplitude: float = 2.0
    period: float = 14.0
    drift: float = 3.0

    @model_validator(mode="after")
    def _period_positive(self) -> "MotionModel":
        if self.kind == "sm" and self.period <= 0.0:
            raise ValueError("SM period must be positive")
        return self


@dataclass
class VehicleState:
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    w: np.ndarray
    t: float = 0.0

    @classmethod
    def at_rest(cls, p, R=None, v=None) -> "VehicleState":
        return cls(p=np.array(p, dtype=float),
                   v=np.zeros(3) if v is None else np.array(v, dtype=float),
                   R=np.eye(3) if R is None else np.array(R, dtype=float),
                   w=np.zeros(3))

    @property
    def thrust_axis(self) -> np.ndarray:
        return self.R[:, 2]


@dataclass(frozen=True)
class TargetState:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    t: float


class RelativeState(NamedTuple):
    p_r: np.ndarray
    v_r: np.ndarray
    range: float
    closing_rate: float
    intercepted: bool


def _omega_integral(w0: np.ndarray, wd: np.ndarray, tau: float, s: float) -> np.ndarray:
    if tau <= 0.0:
        return wd * s
    return wd * s + (w0 - wd) * (tau * (1.0 - math.exp(-s / tau)))


def step_vehicle(state: VehicleState, f_d: float, w_d: np.ndarray, params: VehicleParams,
                 dt: float, air_velocity: np.ndarray | None = None,
                 drag: float = 0.0) -> VehicleState:
    """Advance the interceptor by ``dt`` under thrust ``f_d`` and body-rate command ``w_d``.

    Translation is RK4 with the thrust direction evaluated on the attitude
    trajectory; attitude uses the exponential map of the integrated body
    rate, which follows ``w_d`` with lag ``params.tau_w``.
    """
    if not 0.0 < dt <= 0.02:
        raise ValueError("dt must lie in (0, 0.02] s")
    w_d = np.asarray(w_d, dtype=float)
    R0, w0 = state.R, state.w
    tau = params.tau_w
    k = f_d / params.mass

    half = 0.5 * dt
    n0 = R0[:, 2]
    n_half = (R0 @ expm_so3(_omega_integral(w0, w_d, tau, half)))[:, 2]
    R1 = R0 @ expm_so3(_omega_integral(w0, w_d, tau, dt))
    n1 = R1[:, 2]

    if drag > 0.0 and air_velocity is not None:
        def acc(n, v):
            return GRAVITY_E + k * n + drag * (air_velocity - v)
    else:
        def acc(n, v):
            return GRAVITY_E + k * n

    p, v = state.p, state.v
    a1 = acc(n0, v)
    v2 = v + half * a1
    a2 = acc(n_half, v2)
    v3 = v + half * a2
    a3 = acc(n_half, v3)
    v4 = v + dt * a3
    a4 = acc(n1, v4)
    p_new = p + dt * (v + 2.0 * v2 + 2.0 * v3 + v4) / 6.0
    v_new = v + dt * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0

    speed = math.sqrt(float(v_new @ v_new))
    if speed > params.v_max:
        v_new = v_new * (params.v_max / speed)

    if tau > 0.0:
        w_new = w_d + (w0 - w_d) * math.exp(-dt / tau)
    else:
        w_new = w_d.copy()

    # one Newton-Schulz pass keeps R on SO(3) against round-off
    R1 = 0.5 * R1 @ (3.0 * np.eye(3) - R1.T @ R1)

    if not (np.isfinite(p_new).all() and np.isfinite(v_new).all() and np.isfinite(R1).all()):
        raise SimulationDiverged(f"non-finite vehicle state at t={state.t + dt:.4f}")
    return VehicleState(p=p_new, v=v_new, R=R1, w=w_new, t=state.t + dt)


def step_target(model: MotionModel, t: float) -> TargetState:
    """Evaluate the target motion law at absolute time ``t`` (stateless)."""
    if t < 0.0:
        raise ValueError("t must be non-negative")
    p0 = np.array(model.p0, dtype=float)
    if model.kind == "static":
        return TargetState(p0, np.zeros(3), np.zeros(3), t)
    if model.kind == "cv":
        v = np.array(model.velocity, dtype=float)
        return TargetState(p0 + v * t, v, np.zeros(3), t)
    if model.kind == "ca":
        a = np.array(model.accel, dtype=float)
        return TargetState(p0 + 0.5 * a * t * t, a * t, a, t)
    om = 2.0 * math.pi / model.period
    A = model.amplitude
    p = p0 + np.array([A * math.sin(om * t), model.drift * t, 0.0])
    v = np.array([A * om * math.cos(om * t), model.drift, 0.0])
    a = np.array([-A * om * om * math.sin(om * t), 0.0, 0.0])
    return TargetState(p, v, a, t)


def relative_state(vehicle: VehicleState, target: TargetState) -> RelativeState:
    p_r = target.p - vehicle.p
    v_r = target.v - vehicle.v
    rng = math.sqrt(float(p_r @ p_r))
    if rng == 0.0:
        return RelativeState(p_r, v_r, 0.0, 0.0, True)
    return RelativeState(p_r, v_r, rng, float(p_r @ v_r) / rng, False)


class WindField:
    """Per-run wind state: mean wind plus an exactly discretized Gauss-Markov gust."""

    def __init__(self, model: WindModel):
        self.model = model
        self.mean = np.array(model.mean, dtype=float)
        self.gust = np.zeros(3)

    @property
    def air_velocity(self) -> np.ndarray:
        return self.mean + self.gust

    def advance(self, dt: float, rng: np.random.Generator) -> None:
        if self.model.gust_std == 0.0:
            return
        phi = math.exp(-dt / self.model.corr_time)
        scale = self.model.gust_std * math.sqrt(1.0 - phi * phi)
        self.gust = phi * self.gust + scale * rng.standard_normal(3)


class TargetDrift:
    """Wind-driven displacement of a tethered target about its nominal path."""

    def __init__(self, model: WindModel):
        self.model = model
        self.offset = np.zeros(3)
        self.rate = np.zeros(3)

    def advance(self, dt: float, air_velocity: np.ndarray) -> None:
        c = self.model.drag_target
        if c == 0.0:
            return
        acc = c * (air_velocity - self.rate) - self.model.tether_stiffness * self.offset
        self.rate = self.rate + dt * acc
        self.offset = self.offset + dt * self.rate

    def apply(self, tgt: TargetState) -> TargetState:
        if self.model.drag_target == 0.0:
            return tgt
        return replace(tgt, p=tgt.p + self.offset, v=tgt.v + self.rate)
