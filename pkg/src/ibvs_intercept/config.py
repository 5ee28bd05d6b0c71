"""Scenario configuration: one strict JSON document per engagement.

Units are SI and angles are radians.  Unknown keys are rejected at every
nesting level.  Every section has defaults, so ``{}`` is a valid scenario
(a static target 20 m ahead of a hovering interceptor).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .control import FovParams
from .dkf import DkfParams
from .dynamics import MotionModel, VehicleParams, Vec3, WindModel
from .guidance import GuidanceParams
from .sensor import CameraIntrinsics


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class InitialState(_Strict):
    position: Vec3 = (0.0, 0.0, 10.0)
    velocity: Vec3 = (0.0, 0.0, 0.0)
    yaw: float = Field(0.0, description="heading CCW from north, rad")


class SensorConfig(_Strict):
    camera_hz: float = Field(30.0, gt=0)
    latency: float = Field(0.1, ge=0, description="capture-to-delivery delay, s")
    pixel_noise: float = Field(1.5, ge=0, description="detector centroid noise std, px")
    dropout: float = Field(0.0, ge=0, le=1, description="probability a frame is lost")


class Rates(_Strict):
    physics_hz: float = Field(500.0, gt=0)
    control_hz: float = Field(100.0, gt=0)


class MonitorConfig(_Strict):
    transient: float = Field(1.0, ge=0, description="minimum start-up window, s")
    transient_fraction: float = Field(0.1, ge=0, le=1)
    terminal_range: float = Field(2.0, ge=0, description="monitors stop below this range, m")
    l2_rate_hz: float = Field(10.0, gt=0)
    qdot_window: float = Field(0.5, gt=0, description="s")
    qdot_tol: float = Field(1e-3, ge=0, description="rad/s")
    speed_settle: float = Field(0.98, gt=0, le=1,
                                description="LOS-rate windows start once speed reaches this fraction of v_cap")


class ScenarioConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2 ** 64)
    controller: Literal["proposed", "pg"] = "proposed"
    vehicle: VehicleParams = VehicleParams()
    initial: InitialState = InitialState()
    target: MotionModel = MotionModel()
    camera: CameraIntrinsics = CameraIntrinsics()
    sensor: SensorConfig = SensorConfig()
    dkf: DkfParams = DkfParams()
    guidance: GuidanceParams = GuidanceParams()
    fov: FovParams = FovParams()
    wind: WindModel = WindModel()
    rates: Rates = Rates()
    monitors: MonitorConfig = MonitorConfig()
    attitude_gain: float = Field(2.0, gt=0, description="multiplier on the tilt-correcting body rate")
    capture_radius: float = Field(0.08, gt=0, description="m")
    max_duration: float = Field(30.0, gt=0, description="s")
    fov_grace: float = Field(0.3, ge=0, description="s")

    @model_validator(mode="after")
    def _rates(self) -> "ScenarioConfig":
        r = self.rates
        if not r.physics_hz >= r.control_hz >= self.sensor.camera_hz:
            raise ValueError("rates must satisfy physics_hz >= control_hz >= camera_hz")
        ratio = r.physics_hz / r.control_hz
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("physics_hz must be an integer multiple of control_hz")
        if 1.0 / r.physics_hz > 0.02:
            raise ValueError("physics step must not exceed 0.02 s")
        return self

    @property
    def substeps(self) -> int:
        return int(round(self.rates.physics_hz / self.rates.control_hz))

    def with_updates(self, **sections) -> "ScenarioConfig":
        """Copy with top-level fields replaced; nested dicts update the existing section."""
        data = self.model_dump()
        for key, value in sections.items():
            if isinstance(value, BaseModel):
                value = value.model_dump()
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return ScenarioConfig.model_validate(data)


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return ScenarioConfig.model_validate(json.load(fh))


def dump_config(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)


def noiseless(cfg: ScenarioConfig) -> ScenarioConfig:
    return cfg.with_updates(sensor={"pixel_noise": 0.0, "dropout": 0.0})
