"""FOV-holding yaw loop, desired acceleration and the geometric tilt/attitude loop."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .mathcore import GRAVITY_E, clamp_scalar, rodrigues, sat_vec, vex

TILT_EPS = 1e-15
ANTIPARALLEL_EPS = 1e-6


class FovParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    k_p: float = Field(0.03, gt=0, description="yaw rate per pixel, rad/s/px")
    k_d: float = Field(0.01, gt=0, description="yaw rate per pixel rate, rad/s/(px/s)")
    epsilon: float | None = Field(None, gt=0, description="allowed v-axis excursion, px; None derives it")


@dataclass(frozen=True)
class Command:
    f_d: float
    w_d: np.ndarray
    t: float = 0.0


def yaw_rate_pd(e_x: float, de_x: float, params: FovParams) -> float:
    """``w_psi = k_p e_x + k_d de_x``: rotation rate about the camera's image-down axis."""
    return params.k_p * e_x + params.k_d * de_x


def lambda_check(e_x: float, v_z_cam: float, p_tz: float, f_oc: float,
                 params: FovParams) -> tuple[float, bool]:
    """Convergence rate of the linearized horizontal image error and its sign."""
    if p_tz <= 0.0:
        raise ValueError("target depth must be positive")
    c = 1.0 + (e_x / f_oc) ** 2
    lam = (-v_z_cam / (f_oc * p_tz) + params.k_p * c) / (1.0 + params.k_d * c)
    return lam, lam > 0.0


def desired_accel(v_d, v_now, dt: float, a_max: float) -> np.ndarray:
    """``(v_d - v_now) / dt`` clipped to norm ``a_max``."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    a = (np.asarray(v_d, dtype=float) - np.asarray(v_now, dtype=float)) / dt
    return sat_vec(a, a_max)


def lift_direction(a_d, g_e=GRAVITY_E) -> np.ndarray:
    d = np.asarray(a_d, dtype=float) - g_e
    n = math.sqrt(float(d @ d))
    if n <= 1e-6:
        raise ValueError("degenerate lift demand (a_d cancels gravity); check a_max")
    return d / n


def tilt_rotation(n_f, n_fd) -> np.ndarray:
    """Smallest rotation taking the current lift axis ``n_f`` onto ``n_fd`` (both earth frame)."""
    n_f = np.asarray(n_f, dtype=float)
    n_fd = np.asarray(n_fd, dtype=float)
    r = np.cross(n_f, n_fd)
    s = math.sqrt(float(r @ r))
    # atan2 stays accurate near 0 and pi where acos of the dot product does not
    phi = math.atan2(s, float(n_f @ n_fd))
    if phi < TILT_EPS:
        return np.eye(3)
    if phi > math.pi - ANTIPARALLEL_EPS:
        ex = np.array([1.0, 0.0, 0.0])
        r = ex - (ex @ n_f) * n_f
        if np.linalg.norm(r) < 1e-6:
            ey = np.array([0.0, 1.0, 0.0])
            r = ey - (ey @ n_f) * n_f
        return rodrigues(r / np.linalg.norm(r), phi)
    return rodrigues(r / s, phi)


def attitude_rate(R_d, R_be) -> np.ndarray:
    """Body rate ``-vex(R_d^T R - R^T R_d)``, which makes tr(I - R_d^T R) non-increasing."""
    E = R_d.T @ R_be
    return -vex(E - E.T)


def attitude_error(R_d, R_be) -> float:
    return float(np.trace(np.eye(3) - R_d.T @ R_be))


def thrust_magnitude(a_d, n_f, mass: float, f_max: float, g_e=GRAVITY_E) -> float:
    """``m * n_f . (a_d - g)`` clamped into ``[0, f_max]``."""
    f = mass * float(np.asarray(n_f) @ (np.asarray(a_d, dtype=float) - g_e))
    return clamp_scalar(f, 0.0, f_max)


def assemble_command(w_tilt, w_psi: float, a_d, n_f, mass: float, f_max: float,
                     w_max: float, yaw_axis_b=(0.0, 0.0, -1.0), t: float = 0.0) -> Command:
    """Saturated body-rate command plus clamped thrust.

    ``w_psi`` is applied about ``yaw_axis_b``, the body-frame direction of the
    camera's image-down axis (body -z for the forward mount), so a positive
    horizontal image error turns the camera toward the target.
    """
    w = np.asarray(w_tilt, dtype=float) + w_psi * np.asarray(yaw_axis_b, dtype=float)
    return Command(thrust_magnitude(a_d, n_f, mass, f_max), sat_vec(w, w_max), t)


def fov_excursion_bound(dq_y: float, v0: float, vfov: float) -> float:
    """Vertical image excursion produced by a LOS change ``dq_y``: v0 tan(dq_y) / tan(vfov/2)."""
    if not 0.0 <= dq_y < math.pi / 2:
        raise ValueError("dq_y must lie in [0, pi/2)")
    if not 0.0 < vfov < math.pi:
        raise ValueError("vfov must lie in (0, pi)")
    return v0 * math.tan(dq_y) / math.tan(0.5 * vfov)
