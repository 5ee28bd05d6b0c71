"""Synthetic strapdown camera: pinhole projection, pixel noise, frame rate and latency."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .mathcore import camera_mount_rotation

DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480
DEFAULT_HFOV = math.radians(120.0)
DEFAULT_FOCAL = (DEFAULT_WIDTH / 2) / math.tan(DEFAULT_HFOV / 2)
DEFAULT_VFOV = 2.0 * math.atan((DEFAULT_HEIGHT / 2) / DEFAULT_FOCAL)


class CameraIntrinsics(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    f_oc: float = Field(DEFAULT_FOCAL, gt=0, description="focal length, px")
    u0: float = DEFAULT_WIDTH / 2
    v0: float = DEFAULT_HEIGHT / 2
    width: int = Field(DEFAULT_WIDTH, gt=0)
    height: int = Field(DEFAULT_HEIGHT, gt=0)
    vfov: float = Field(DEFAULT_VFOV, gt=0, lt=math.pi, description="vertical FOV, rad")
    mount: Literal["forward", "down"] = "forward"

    @model_validator(mode="after")
    def _consistent(self) -> "CameraIntrinsics":
        if not (0 <= self.u0 < self.width and 0 <= self.v0 < self.height):
            raise ValueError("principal point outside the image")
        implied = (self.height / 2) / self.f_oc
        if abs(math.tan(self.vfov / 2) - implied) > 0.01 * implied:
            raise ValueError("vfov inconsistent with f_oc and height (>1%)")
        return self

    @classmethod
    def from_hfov(cls, width: int, height: int, hfov: float, **kw) -> "CameraIntrinsics":
        f = (width / 2) / math.tan(hfov / 2)
        return cls(f_oc=f, u0=width / 2, v0=height / 2, width=width, height=height,
                   vfov=2.0 * math.atan((height / 2) / f), **kw)

    @property
    def R_cb(self) -> np.ndarray:
        return camera_mount_rotation(self.mount)

    def in_image(self, u: float, v: float) -> bool:
        return 0.0 <= u < self.width and 0.0 <= v < self.height


@dataclass(frozen=True)
class PixelObservation:
    u: float
    v: float
    t_capture: float
    valid: bool
    e_x: float
    e_y: float

    @classmethod
    def make(cls, u: float, v: float, t: float, valid: bool,
             cam: CameraIntrinsics) -> "PixelObservation":
        return cls(u, v, t, valid, u - cam.u0, v - cam.v0)


def camera_point(p_T, p_M, R_be, R_cb) -> np.ndarray:
    """Target position in the camera frame."""
    return R_cb.T @ (R_be.T @ (np.asarray(p_T, dtype=float) - p_M))


def project(p_T, vehicle, cam: CameraIntrinsics, t: float | None = None) -> PixelObservation:
    """Pinhole projection of an earth-frame point; out-of-view points come back invalid."""
    t = vehicle.t if t is None else t
    pc = camera_point(p_T, vehicle.p, vehicle.R, cam.R_cb)
    if pc[2] <= 0.0:
        return PixelObservation(math.nan, math.nan, t, False, math.nan, math.nan)
    u = cam.u0 + cam.f_oc * pc[0] / pc[2]
    v = cam.v0 + cam.f_oc * pc[1] / pc[2]
    return PixelObservation.make(u, v, t, cam.in_image(u, v), cam)


def add_pixel_noise(obs: PixelObservation, sigma: float, rng: np.random.Generator,
                    cam: CameraIntrinsics) -> PixelObservation:
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0.0 or not math.isfinite(obs.u):
        return obs
    du, dv = rng.normal(0.0, sigma, 2)
    u, v = obs.u + du, obs.v + dv
    return PixelObservation.make(u, v, obs.t_capture, obs.valid and cam.in_image(u, v), cam)


def los_from_pixels(e_x: float, e_y: float, f_oc: float, R_be, R_cb) -> np.ndarray:
    """Earth-frame unit line of sight from an image error and the current attitude."""
    ray = np.array([e_x, e_y, f_oc])
    n = R_be @ (R_cb @ ray)
    return n / math.sqrt(float(n @ n))


class LatencyQueue:
    """Frame clock plus FIFO of captured frames awaiting delivery after ``latency`` s."""

    def __init__(self, rate_hz: float, latency: float):
        if rate_hz <= 0.0:
            raise ValueError("camera rate must be positive")
        if latency < 0.0:
            raise ValueError("latency must be non-negative")
        self.interval = 1.0 / rate_hz
        self.latency = latency
        self.pending: deque[PixelObservation] = deque()
        self.frames_captured = 0
        self.last_t = -math.inf

    @property
    def next_capture(self) -> float:
        return self.frames_captured * self.interval

    def capture_due(self, t: float) -> bool:
        return t >= self.next_capture - 1e-9

    def push(self, obs: PixelObservation) -> None:
        self.pending.append(obs)
        self.frames_captured += 1

    def pop_ready(self, t: float) -> PixelObservation | None:
        if self.pending and self.pending[0].t_capture + self.latency <= t + 1e-9:
            return self.pending.popleft()
        return None


def camera_tick(queue: LatencyQueue, t: float,
                truth: Callable[[float], PixelObservation]) -> PixelObservation | None:
    """Capture a frame if one is due at ``t`` and release at most one delivered frame."""
    if t < queue.last_t:
        raise ValueError("camera_tick time went backwards")
    queue.last_t = t
    if queue.capture_due(t):
        queue.push(truth(t))
    return queue.pop_ready(t)


def drop_frame(obs: PixelObservation) -> PixelObservation:
    return replace(obs, valid=False)
