"""Frame conventions, rotation algebra and saturation primitives.

Frames
------
Earth frame is ENU: x East, y North, z Up, with gravity ``(0, 0, -9.8)``.
Body frame: x right, y forward, z up (lift acts along body +z).
Camera frame: z optical axis, x image-right, y image-down.  The default
forward mount maps camera z to body +y and camera y to body -z.

A rotation matrix ``R_ab`` maps vectors expressed in frame ``b`` into frame
``a``; ``R_be`` in this package is the body-to-earth attitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ROT_TOL = 1e-9
ALG_TOL = 1e-12
GRAVITY = 9.8


@dataclass(frozen=True)
class FrameConvention:
    """Axis meaning and gravity vector; flip ``up_sign`` for a z-down earth frame."""

    up_sign: float = 1.0
    gravity: float = GRAVITY
    camera_mount: str = "forward"
    g_e: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.up_sign not in (1.0, -1.0):
            raise ValueError("up_sign must be +1 or -1")
        object.__setattr__(self, "g_e", np.array([0.0, 0.0, -self.up_sign * self.gravity]))

    @property
    def R_cb(self) -> np.ndarray:
        return camera_mount_rotation(self.camera_mount)


def camera_mount_rotation(mount: str = "forward") -> np.ndarray:
    """Camera-to-body rotation for the supported strapdown mounts."""
    if mount == "forward":
        # columns: camera x -> body x, camera y -> body -z, camera z -> body y
        return np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    if mount == "down":
        # optical axis along body -z, image-down along body -y
        return np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    raise ValueError(f"unknown camera mount {mount!r}")


GRAVITY_E = FrameConvention().g_e


def skew(v) -> np.ndarray:
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vex(M, tol: float = ROT_TOL) -> np.ndarray:
    """Inverse of :func:`skew`; rejects matrices with a symmetric part above ``tol``."""
    M = np.asarray(M, dtype=float)
    if np.linalg.norm(M + M.T) > tol:
        raise ValueError("vex: matrix is not skew-symmetric")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def rodrigues(axis, angle: float, tol: float = ROT_TOL) -> np.ndarray:
    """Rotation of ``angle`` rad about the unit ``axis``: I + [r]x sin + [r]x^2 (1 - cos)."""
    if angle == 0.0:
        return np.eye(3)
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > tol:
        raise ValueError("rodrigues: axis must be a unit vector")
    K = skew(axis)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def expm_so3(phi) -> np.ndarray:
    """Exponential map of ``skew(phi)``; stable for tiny rotation vectors."""
    x, y, z = float(phi[0]), float(phi[1]), float(phi[2])
    th2 = x * x + y * y + z * z
    if th2 < 1e-12:
        a = 1.0 - th2 / 6.0
        b = 0.5 - th2 / 24.0
    else:
        th = math.sqrt(th2)
        a = math.sin(th) / th
        b = (1.0 - math.cos(th)) / th2
    return np.array([
        [1.0 - b * (y * y + z * z), b * x * y - a * z, b * x * z + a * y],
        [b * x * y + a * z, 1.0 - b * (x * x + z * z), b * y * z - a * x],
        [b * x * z - a * y, b * y * z + a * x, 1.0 - b * (x * x + y * y)],
    ])


def orthonormalize(R) -> np.ndarray:
    """Nearest rotation matrix (polar projection via SVD)."""
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0.0:
        U[:, -1] = -U[:, -1]
        Q = U @ Vt
    return Q


def is_rotation(R, tol: float = ROT_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    return (np.linalg.norm(R.T @ R - np.eye(3)) <= tol
            and abs(np.linalg.det(R) - 1.0) <= tol)


def sat_vec(w, w_max: float) -> np.ndarray:
    """Scale ``w`` down to norm ``w_max`` when it exceeds it; direction is kept."""
    if w_max <= 0.0:
        raise ValueError("sat_vec: limit must be positive")
    w = np.asarray(w, dtype=float)
    n = math.sqrt(float(w @ w))
    if n <= w_max:
        return w.copy()
    return w * (w_max / n)


def clamp_scalar(x: float, lo: float, hi: float) -> float:
    if lo > hi:
        raise ValueError("clamp_scalar: lo > hi")
    return lo if x < lo else hi if x > hi else x


def unit(v, eps: float = 1e-12) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = math.sqrt(float(v @ v))
    if n < eps:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def yaw_pitch_roll(R) -> tuple[float, float, float]:
    """Heading (CCW from north), pitch (nose up) and roll (right wing down) of ``R_be``, in rad.

    Yaw zero means body forward points north.  Logging only.
    """
    fwd = R[:, 1]
    right = R[:, 0]
    yaw = math.atan2(-fwd[0], fwd[1])
    pitch = math.asin(max(-1.0, min(1.0, fwd[2])))
    roll = math.asin(max(-1.0, min(1.0, -right[2])))
    return yaw, pitch, roll


def yaw_rotation(yaw: float) -> np.ndarray:
    """Level attitude with body forward rotated ``yaw`` rad CCW from north."""
    return rodrigues(np.array([0.0, 0.0, 1.0]), yaw)
