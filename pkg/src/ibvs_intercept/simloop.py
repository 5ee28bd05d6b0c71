"""Single-engagement orchestration: physics, camera, DKF, guidance and control.

Scheduling per control tick ``t_k = k / control_hz``:

1. evaluate the target and the relative geometry;
2. camera: capture if a frame is due, deliver at most one delayed frame;
3. DKF: predict to ``t_k`` (with the camera rotation since the last tick)
   then fuse the delivered frame at its capture time;
4. guidance (PNG or pursuit) and control produce the command;
5. log the tick, then check capture on the segment since the previous tick,
   target visibility and the time limit;
6. the command is held for ``physics_hz / control_hz`` physics steps.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, astuple, dataclass, fields

import numpy as np

from .config import ScenarioConfig
from .control import (
    Command, assemble_command, attitude_rate, desired_accel, fov_excursion_bound,
    lambda_check, lift_direction, tilt_rotation, yaw_rate_pd,
)
from .dkf import DelayedKalmanFilter, rotation_pixel_rate
from .dynamics import (
    SimulationDiverged, TargetDrift, VehicleState, WindField, relative_state, step_target,
    step_vehicle,
)
from .guidance import (
    GuidanceState, VelocityAngles, desired_velocity, dynamics_los_bound, los_angles, los_rate,
    png_step, pursuit_guidance, speed_schedule, velocity_angles, wrap_pi,
)
from .mathcore import vex, yaw_pitch_roll, yaw_rotation
from .sensor import LatencyQueue, add_pixel_noise, camera_point, camera_tick, drop_frame, project

OUTCOMES = ("intercepted", "fov_lost", "timeout", "diverged")


@dataclass(slots=True)
class StepRecord:
    t: float
    px: float
    py: float
    pz: float
    vx: float
    vy: float
    vz: float
    yaw: float
    pitch: float
    roll: float
    tx: float
    ty: float
    tz: float
    range: float
    closing_rate: float
    q_y: float
    q_z: float
    q_dot: float
    q_dot_est: float
    e_x: float
    e_y: float
    e_x_est: float
    e_y_est: float
    f_d: float
    w_x: float
    w_y: float
    w_z: float
    a_normal: float
    v_normal: float
    fov_valid: bool
    l2: float
    lam: float
    lambda_ok: bool
    filter_ready: bool


CSV_COLUMNS = tuple(f.name for f in fields(StepRecord))


@dataclass
class MonitorReport:
    l2_violations: int = 0
    lambda_violations: int = 0
    qdot_increases: int = 0
    qdot_windows: int = 0
    k_bound_violations: int = 0
    window_start: float = 0.0
    window_end: float = 0.0


@dataclass
class RunSummary:
    seed: int
    controller: str
    outcome: str
    miss_distance: float
    t_closest: float
    terminal_speed: float
    duration: float
    max_w_cmd: float
    delta_e_y: float
    delta_q_g: float
    fov_bound: float
    frames_total: int
    frames_valid: int
    l2_violations: int
    lambda_violations: int
    qdot_increases: int
    k_bound_violations: int
    dkf_skipped: int
    diagnostic: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@dataclass
class RunResult:
    summary: RunSummary
    records: list[StepRecord]


def records_to_csv(records: list[StepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(x) for x in astuple(r)])
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    return f"{x + 0.0:.9g}"  # + 0.0 folds -0.0 into 0


def _segment_min_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Distance from the origin to the segment ``[a, b]``."""
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return math.sqrt(float(a @ a))
    s = min(1.0, max(0.0, -float(a @ d) / dd))
    c = a + s * d
    return math.sqrt(float(c @ c))


def _relative_positions(records) -> np.ndarray:
    return np.array([[r.tx - r.px, r.ty - r.py, r.tz - r.pz] for r in records])


def closest_approach(records) -> tuple[float, int]:
    """Interpolated miss distance and the index of the segment end nearest to it."""
    if not records:
        raise ValueError("no records")
    rel = _relative_positions(records)
    if len(rel) == 1:
        return float(np.linalg.norm(rel[0])), 0
    a, b = rel[:-1], rel[1:]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(dd > 0.0, -np.einsum("ij,ij->i", a, d) / dd, 0.0)
    s = np.clip(s, 0.0, 1.0)
    c = a + s[:, None] * d
    dist = np.sqrt(np.einsum("ij,ij->i", c, c))
    i = int(np.argmin(dist))
    return float(dist[i]), i + (1 if s[i] > 0.5 else 0)


def miss_distance(records) -> float:
    """Minimum range, refined by closest approach on the straight segments between samples."""
    return closest_approach(records)[0]


def transient_end(records, cfg: ScenarioConfig) -> float:
    dur = records[-1].t - records[0].t if records else 0.0
    return records[0].t + max(cfg.monitors.transient, cfg.monitors.transient_fraction * dur)


def monitors(records: list[StepRecord], cfg: ScenarioConfig, t_end: float | None = None,
             guidance_samples: list[tuple[float, float, float, float]] | None = None) -> MonitorReport:
    """Count stability-condition violations after the transient and before the terminal phase.

    ``guidance_samples`` holds ``(t, v_m, cos_eta_m, range_rate)`` for the
    navigation-constant check; it is skipped when omitted.
    """
    rep = MonitorReport()
    if not records:
        return rep
    mc = cfg.monitors
    t0 = transient_end(records, cfg)
    if t_end is None:
        t_end = records[-1].t
    window = [r for r in records if t0 <= r.t <= t_end and r.range >= mc.terminal_range]
    rep.window_start = t0
    rep.window_end = window[-1].t if window else t0
    if not window:
        return rep

    rep.lambda_violations = sum(1 for r in window if not r.lambda_ok)

    stride = max(1, int(round(cfg.rates.control_hz / mc.l2_rate_hz)))
    dt_ctrl = 1.0 / cfg.rates.control_hz
    sampled = [r for r in window if int(round(r.t / dt_ctrl)) % stride == 0]
    for prev, cur in zip(sampled, sampled[1:]):
        if cur.l2 > prev.l2 * (1.0 + 1e-12):
            rep.l2_violations += 1

    # the LOS-rate argument assumes constant interceptor speed, so these
    # windows start only after the speed ramp has settled near v_cap
    v_set = mc.speed_settle * cfg.guidance.v_cap
    t_set = next((r.t for r in window if r.vx ** 2 + r.vy ** 2 + r.vz ** 2 >= v_set ** 2), math.inf)
    n_win = max(1, int(round(mc.qdot_window / dt_ctrl)))
    qd = [r.q_dot for r in window if r.t >= t_set]
    means = [float(np.mean(qd[i:i + n_win])) for i in range(0, len(qd) - n_win + 1, n_win)]
    rep.qdot_windows = len(means)
    rep.qdot_increases = sum(1 for a, b in zip(means, means[1:]) if b - a > mc.qdot_tol)

    if guidance_samples and cfg.controller == "proposed":
        K = min(cfg.guidance.K_y, cfg.guidance.K_z)
        for t, v_m, cos_eta, rdot in guidance_samples:
            if t0 <= t <= rep.window_end and v_m * cos_eta > 0.0:
                if not K > 2.0 * abs(rdot) / (v_m * cos_eta):
                    rep.k_bound_violations += 1
    return rep


class _Engagement:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        ss = np.random.SeedSequence(cfg.seed)
        self.sensor_rng, self.wind_rng = (np.random.default_rng(s) for s in ss.spawn(2))
        init = cfg.initial
        self.vehicle = VehicleState.at_rest(init.position, R=yaw_rotation(init.yaw), v=init.velocity)
        self.wind = WindField(cfg.wind)
        self.drift = TargetDrift(cfg.wind)
        self.queue = LatencyQueue(cfg.sensor.camera_hz, cfg.sensor.latency)
        span = 2.0 * max(cfg.sensor.latency, 1.0 / cfg.sensor.camera_hz)
        self.dkf = DelayedKalmanFilter(cfg.dkf, span,
                                       camera=(cfg.camera.f_oc, cfg.camera.u0, cfg.camera.v0))
        self.R_prev = self.vehicle.R.copy()
        self.gs = GuidanceState()
        self.prev_q = None
        self.prev_sigma: VelocityAngles | None = None
        self.cam = cfg.camera
        self.R_cb = cfg.camera.R_cb
        self.yaw_axis_b = self.R_cb[:, 1].copy()
        self.frames_truth: list[tuple[float, bool, float]] = []  # (t, valid, e_y)
        self.guidance_samples: list[tuple[float, float, float, float]] = []
        self.max_w = 0.0
        m = cfg.vehicle.mass
        self.cmd = Command(m * 9.8, np.zeros(3), 0.0)

    def target_at(self, t: float):
        return self.drift.apply(step_target(self.cfg.target, t))

    def capture(self, t: float, tgt_p: np.ndarray):
        obs = project(tgt_p, self.vehicle, self.cam, t)
        self.frames_truth.append((t, obs.valid, obs.e_y))
        obs = add_pixel_noise(obs, self.cfg.sensor.pixel_noise, self.sensor_rng, self.cam)
        if self.cfg.sensor.dropout > 0.0 and self.sensor_rng.random() < self.cfg.sensor.dropout:
            obs = drop_frame(obs)
        return obs

    def control(self, t: float, dt: float) -> tuple[Command, tuple]:
        cfg = self.cfg
        veh = self.vehicle
        R, v = veh.R, veh.v
        vp = cfg.vehicle
        n_f = R[:, 2]
        info = (math.nan, math.nan, math.nan, math.nan, math.nan)
        if not self.dkf.initialized:
            a_d = np.zeros(3)
            w_psi = 0.0
        else:
            e_x, e_y, du, dv = self.dkf.estimate(self.cam.u0, self.cam.v0)
            f_oc = self.cam.f_oc
            n_t = self._ray(R, e_x, e_y)
            q = los_angles(n_t, self.prev_q)
            # the filter rate excludes ego-rotation, so it is the LOS motion
            # seen in a non-rotating camera; use it for a smooth LOS increment
            q_back = los_angles(self._ray(R, e_x - du * dt, e_y - dv * dt), q)
            dq = (q.q_y - q_back.q_y, wrap_pi(q.q_z - q_back.q_z))
            # the yaw PD wants the full image rate, so add the gyro part back
            w_c = self.R_cb.T @ veh.w
            de_x = du + rotation_pixel_rate(e_x, e_y, w_c, f_oc)[0]
            speed = math.sqrt(float(v @ v))
            if self.prev_sigma is None:
                self.prev_sigma = VelocityAngles(q.q_y, q.q_z, False)
            sig = velocity_angles(v, self.prev_sigma, cfg.guidance.min_speed)
            self.prev_sigma = sig
            v_mag = speed_schedule(speed, cfg.guidance, dt)
            if cfg.controller == "proposed":
                s_yd, s_zd = png_step(self.gs, q, sig, cfg.guidance, dq)
                v_d = desired_velocity(s_yd, s_zd, v_mag)
            else:
                v_d = pursuit_guidance(n_t, v_mag)
            a_d = desired_accel(v_d, v, dt, vp.a_max)
            w_psi = yaw_rate_pd(e_x, de_x, cfg.fov)
            qd_est = math.hypot(dq[0], math.cos(q.q_y) * dq[1]) / dt
            self.prev_q = q
            info = (q.q_y, q.q_z, qd_est, e_x, e_y)
        n_fd = lift_direction(a_d)
        R_d = tilt_rotation(n_f, n_fd) @ R
        w_tilt = cfg.attitude_gain * attitude_rate(R_d, R)
        cmd = assemble_command(w_tilt, w_psi, a_d, n_f, vp.mass, vp.f_max, vp.w_max,
                               self.yaw_axis_b, t)
        return cmd, info

    def _ray(self, R, e_x: float, e_y: float) -> np.ndarray:
        ray = R @ (self.R_cb @ np.array([e_x, e_y, self.cam.f_oc]))
        return ray / math.sqrt(float(ray @ ray))

    def camera_rate(self, dt: float) -> np.ndarray:
        """Mean camera-frame angular rate since the previous call (attitude increment / dt)."""
        E = self.R_prev.T @ self.vehicle.R
        self.R_prev = self.vehicle.R.copy()
        return self.R_cb.T @ (vex(0.5 * (E - E.T)) / dt)

    def physics(self, n: int, dt: float) -> None:
        cfg = self.cfg
        drag = cfg.wind.drag_vehicle
        for _ in range(n):
            self.wind.advance(dt, self.wind_rng)
            air = self.wind.air_velocity
            self.drift.advance(dt, air)
            self.vehicle = step_vehicle(self.vehicle, self.cmd.f_d, self.cmd.w_d, cfg.vehicle,
                                        dt, air, drag)


def run(cfg: ScenarioConfig) -> RunResult:
    """Simulate one engagement; never raises on divergence (outcome ``diverged``)."""
    eng = _Engagement(cfg)
    dt = 1.0 / cfg.rates.control_hz
    dt_phys = 1.0 / cfg.rates.physics_hz
    n_sub = cfg.substeps
    records: list[StepRecord] = []
    outcome = "timeout"
    diagnostic = ""
    prev_rel = None
    prev_v = eng.vehicle.v.copy()
    invisible_since: float | None = None
    k = 0
    while True:
        t = k * dt
        veh = eng.vehicle
        tgt = eng.target_at(t)
        rel = relative_state(veh, tgt)

        obs = camera_tick(eng.queue, t, lambda tc: eng.capture(tc, tgt.p))
        if k > 0:
            eng.dkf.predict(dt, eng.camera_rate(dt))
        if obs is not None:
            eng.dkf.update_delayed(obs)

        try:
            cmd, (q_y, q_z, qd_est, ex_est, ey_est) = eng.control(t, dt)
        except ValueError as exc:
            outcome, diagnostic = "diverged", f"control failure at t={t:.3f}: {exc}"
            break
        eng.cmd = cmd
        eng.max_w = max(eng.max_w, float(np.linalg.norm(cmd.w_d)))

        truth = project(tgt.p, veh, eng.cam, t)
        pc = camera_point(tgt.p, veh.p, veh.R, eng.R_cb)
        e_x_true = truth.e_x if math.isfinite(truth.e_x) else math.nan
        if pc[2] > 0.0:
            v_cam = eng.R_cb.T @ (veh.R.T @ (veh.v - tgt.v))
            lam, lam_ok = lambda_check(e_x_true if math.isfinite(e_x_true) else 0.0,
                                       float(v_cam[2]), float(pc[2]), eng.cam.f_oc, cfg.fov)
        else:
            lam, lam_ok = math.nan, False
        speed = float(np.linalg.norm(veh.v))
        acc = (veh.v - prev_v) / dt if k > 0 else np.zeros(3)
        prev_v = veh.v.copy()
        if speed > 1e-9:
            vh = veh.v / speed
            a_n = float(np.linalg.norm(acc - (acc @ vh) * vh))
        else:
            a_n = float(np.linalg.norm(acc))
        if rel.range > 0.0:
            nt = rel.p_r / rel.range
            v_n = float(np.linalg.norm(veh.v - (veh.v @ nt) * nt))
            cos_eta = float(veh.v @ nt) / speed if speed > 1e-9 else 0.0
            eng.guidance_samples.append((t, speed, cos_eta, rel.closing_rate))
        else:
            v_n = 0.0
        yaw, pitch, roll = yaw_pitch_roll(veh.R)
        l2 = 0.5 * ((e_x_true if math.isfinite(e_x_true) else 0.0) ** 2 + rel.range ** 2)
        records.append(StepRecord(
            t, *veh.p.tolist(), *veh.v.tolist(), yaw, pitch, roll, *tgt.p.tolist(),
            rel.range, rel.closing_rate, q_y, q_z, los_rate(rel.p_r, rel.v_r), qd_est,
            truth.e_x, truth.e_y, ex_est, ey_est, cmd.f_d, *cmd.w_d.tolist(), a_n, v_n,
            truth.valid, l2, lam, lam_ok, eng.dkf.initialized,
        ))

        seg = rel.range if prev_rel is None else _segment_min_distance(prev_rel, rel.p_r)
        prev_rel = rel.p_r
        if seg <= cfg.capture_radius:
            outcome = "intercepted"
            break
        if truth.valid:
            invisible_since = None
        elif invisible_since is None:
            invisible_since = t
        if invisible_since is not None and t - invisible_since > cfg.fov_grace:
            outcome = "fov_lost"
            diagnostic = f"target out of view since t={invisible_since:.3f}"
            break
        if t >= cfg.max_duration:
            outcome = "timeout"
            break
        try:
            eng.physics(n_sub, dt_phys)
        except SimulationDiverged as exc:
            outcome, diagnostic = "diverged", str(exc)
            break
        k += 1

    return RunResult(_summarize(cfg, eng, records, outcome, diagnostic), records)


def _summarize(cfg: ScenarioConfig, eng: _Engagement, records, outcome: str,
               diagnostic: str) -> RunSummary:
    miss, i_close = closest_approach(records)
    t_close = records[i_close].t
    rc = records[i_close]
    term_speed = math.sqrt(rc.vx ** 2 + rc.vy ** 2 + rc.vz ** 2)

    # FOV statistics: frames before the terminal range (inside it the target
    # may legitimately leave the image while passing the camera)
    term_r = cfg.monitors.terminal_range
    t_term = next((r.t for r in records if r.range < term_r), t_close)
    frames = [f for f in eng.frames_truth if f[0] <= min(t_term, t_close)]
    frames_valid = sum(1 for f in frames if f[1])
    e_ys = [f[2] for f in eng.frames_truth if f[0] <= min(t_term, t_close) and f[1]]
    delta_e_y = float(max(e_ys) - min(e_ys)) if e_ys else 0.0
    q_ys = [math.asin(max(-1.0, min(1.0, (r.tz - r.pz) / r.range)))
            for r in records if r.t <= min(t_term, t_close) and r.range > 0]
    delta_q_g = (max(q_ys) - min(q_ys)) if q_ys else 0.0
    dq = min(dynamics_los_bound(cfg.guidance.k_a) + delta_q_g, math.pi / 2 - 1e-9)
    bound = fov_excursion_bound(dq, cfg.camera.v0, cfg.camera.vfov)

    mon = monitors(records, cfg, t_end=min(t_term, t_close), guidance_samples=eng.guidance_samples)
    return RunSummary(
        seed=cfg.seed, controller=cfg.controller, outcome=outcome, miss_distance=miss,
        t_closest=t_close, terminal_speed=term_speed, duration=records[-1].t,
        max_w_cmd=eng.max_w, delta_e_y=delta_e_y, delta_q_g=delta_q_g, fov_bound=bound,
        frames_total=len(frames), frames_valid=frames_valid,
        l2_violations=mon.l2_violations, lambda_violations=mon.lambda_violations,
        qdot_increases=mon.qdot_increases, k_bound_violations=mon.k_bound_violations,
        dkf_skipped=eng.dkf.skipped, diagnostic=diagnostic,
    )
