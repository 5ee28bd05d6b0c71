"""Batch experiments: static-target Monte Carlo, maneuvering-target comparison, metrics.

Run seeds are derived from the base seed with SplitMix64, so run ``i`` of a
batch is the same engagement whatever the number of worker processes and in
whatever order the workers finish.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import ScenarioConfig
from .simloop import RunSummary, run

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x`` (the state is advanced first)."""
    z = (x + GOLDEN64) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def run_seed(base_seed: int, index: int) -> int:
    """Seed of run ``index``: SplitMix64 of the base seed mixed with the index."""
    if index < 0:
        raise ValueError("index must be non-negative")
    return splitmix64(splitmix64(base_seed & MASK64) ^ (index & MASK64))


def _nearest_rank(sorted_vals, p: float):
    n = len(sorted_vals)
    k = max(1, math.ceil(p * n))
    return sorted_vals[k - 1]


def cep(misses) -> float:
    """Circular error probable: the ceil(n/2)-th smallest miss distance."""
    vals = sorted(float(m) for m in misses)
    if not vals:
        raise ValueError("cep of an empty list")
    return _nearest_rank(vals, 0.5)


def quartiles(values) -> tuple[float, float, float]:
    """Nearest-rank (Q1, median, Q3)."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise ValueError("quartiles of an empty list")
    return _nearest_rank(vals, 0.25), _nearest_rank(vals, 0.5), _nearest_rank(vals, 0.75)


@dataclass
class AxisStats:
    median: float
    iqr: float


def image_error_stats(e_x, e_y, u0: float, v0: float) -> tuple[AxisStats, AxisStats]:
    """Median and IQR of pixel errors normalized by the half-image extent per axis."""
    out = []
    for e, half in ((e_x, u0), (e_y, v0)):
        q1, med, q3 = quartiles(np.asarray(e, dtype=float) / half)
        out.append(AxisStats(med, q3 - q1))
    return out[0], out[1]


def image_samples(result, cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """True image errors at valid ticks outside the terminal range."""
    rows = [(r.e_x, r.e_y) for r in result.records
            if r.fov_valid and r.range >= cfg.monitors.terminal_range]
    if not rows:
        return np.empty(0), np.empty(0)
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


# --------------------------------------------------------------------------
# static-target suite

class MonteCarloSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    base: ScenarioConfig = ScenarioConfig()
    runs: int = Field(50, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    controller: Literal["proposed", "pg"] = "proposed"
    range_m: tuple[float, float] = (15.0, 35.0)
    azimuth: tuple[float, float] = (-math.pi / 3, math.pi / 3)
    altitude_offset: tuple[float, float] = (-9.0, 5.0)
    min_altitude: float = 1.0
    heading_error: float = Field(math.radians(15.0), ge=0, description="max |initial heading error|, rad")
    success_radius: float | None = Field(None, gt=0, description="m; None uses the capture radius")

    @model_validator(mode="after")
    def _intervals(self) -> "MonteCarloSpec":
        lo, hi = self.range_m
        if not 0.0 < lo <= hi:
            raise ValueError("range interval must satisfy 0 < lo <= hi")
        for name in ("azimuth", "altitude_offset"):
            a, b = getattr(self, name)
            if a > b:
                raise ValueError(f"{name} interval is reversed")
        if self.altitude_offset[0] <= -hi and self.altitude_offset[1] >= hi:
            raise ValueError("altitude offsets must stay within the range interval")
        return self

    @property
    def radius(self) -> float:
        return self.success_radius if self.success_radius is not None else self.base.capture_radius


def sample_scenario(spec: MonteCarloSpec, index: int) -> ScenarioConfig:
    """Scenario for run ``index``: a static target around the interceptor's start."""
    seed = run_seed(spec.seed, index)
    # a spawn key the engagement itself never uses keeps sampling independent of noise
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    r = rng.uniform(*spec.range_m)
    az = rng.uniform(*spec.azimuth)
    p0 = np.asarray(spec.base.initial.position, dtype=float)
    dz = rng.uniform(*spec.altitude_offset)
    dz = max(dz, spec.min_altitude - p0[2])
    dz = float(np.clip(dz, -0.95 * r, 0.95 * r))
    horiz = math.sqrt(r * r - dz * dz)
    target = p0 + np.array([horiz * math.sin(az), horiz * math.cos(az), dz])
    heading_err = rng.uniform(-spec.heading_error, spec.heading_error)
    # azimuth runs clockwise from north, yaw counter-clockwise
    yaw = -(az + heading_err)
    return spec.base.with_updates(
        seed=seed,
        controller=spec.controller,
        target={"kind": "static", "p0": tuple(float(c) for c in target)},
        initial={"yaw": yaw},
    )


@dataclass
class RunRow:
    index: int
    summary: RunSummary
    success: bool
    e_x: np.ndarray = field(repr=False)
    e_y: np.ndarray = field(repr=False)


def _execute(cfg: ScenarioConfig, index: int, radius: float, keep_records: bool):
    res = run(cfg)
    ex, ey = image_samples(res, cfg)
    row = RunRow(index, res.summary, res.summary.miss_distance <= radius, ex, ey)
    return row, (res.records if keep_records else None)


def _map(fn, args, jobs: int):
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futures = [ex.submit(fn, *a) for a in args]
        return [f.result() for f in futures]


@dataclass
class MonteCarloReport:
    runs: list[RunSummary]
    success: list[bool]
    cep: float
    mean_miss: float
    median_miss: float
    success_rate: float
    intercept_rate: float
    image_x: AxisStats
    image_y: AxisStats
    violations: dict[str, int]
    success_radius: float

    def to_dict(self) -> dict:
        rows = []
        for s, ok in zip(self.runs, self.success):
            d = asdict(s)
            d["success"] = ok
            rows.append(d)
        return {
            "cep": self.cep,
            "mean_miss": self.mean_miss,
            "median_miss": self.median_miss,
            "success_rate": self.success_rate,
            "intercept_rate": self.intercept_rate,
            "success_radius": self.success_radius,
            "image_error": {"x": asdict(self.image_x), "y": asdict(self.image_y)},
            "violations": dict(self.violations),
            "runs": rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_report(rows: list[RunRow], radius: float, u0: float, v0: float) -> MonteCarloReport:
    rows = sorted(rows, key=lambda r: r.index)
    misses = [r.summary.miss_distance for r in rows]
    ex = np.concatenate([r.e_x for r in rows]) if rows else np.empty(0)
    ey = np.concatenate([r.e_y for r in rows]) if rows else np.empty(0)
    if ex.size:
        sx, sy = image_error_stats(ex, ey, u0, v0)
    else:
        sx = sy = AxisStats(math.nan, math.nan)
    viol = {
        "l2": sum(r.summary.l2_violations for r in rows),
        "lambda": sum(r.summary.lambda_violations for r in rows),
        "qdot": sum(r.summary.qdot_increases for r in rows),
        "k_bound": sum(r.summary.k_bound_violations for r in rows),
        "fov_frames_lost": sum(r.summary.frames_total - r.summary.frames_valid for r in rows),
        "fov_excursion": sum(1 for r in rows if r.summary.delta_e_y > 1.1 * r.summary.fov_bound),
        "diverged": sum(1 for r in rows if r.summary.outcome == "diverged"),
    }
    success = [r.success for r in rows]
    return MonteCarloReport(
        runs=[r.summary for r in rows],
        success=success,
        cep=cep(misses),
        mean_miss=float(np.mean(misses)),
        median_miss=quartiles(misses)[1],
        success_rate=sum(success) / len(success),
        intercept_rate=sum(1 for r in rows if r.summary.outcome == "intercepted") / len(rows),
        image_x=sx,
        image_y=sy,
        violations=viol,
        success_radius=radius,
    )


def montecarlo(spec: MonteCarloSpec, jobs: int = 1, keep_records: bool = False):
    """Run the static suite; returns ``(report, records_per_run or None)``.

    Diverged runs are reported, never raised.  The report does not depend on
    ``jobs``.
    """
    cfgs = [sample_scenario(spec, i) for i in range(spec.runs)]
    out = _map(_execute, [(c, i, spec.radius, keep_records) for i, c in enumerate(cfgs)], jobs)
    cam = spec.base.camera
    report = build_report([o[0] for o in out], spec.radius, cam.u0, cam.v0)
    records = [o[1] for o in out] if keep_records else None
    return report, records


# --------------------------------------------------------------------------
# maneuvering targets and the pursuit baseline

MANEUVERS = {
    "CV": {"kind": "cv", "p0": (0.0, 25.0, 1.0), "velocity": (0.0, 0.0, 1.0)},
    "CA": {"kind": "ca", "p0": (-8.0, 15.0, 8.0), "accel": (0.8, 0.0, 0.2)},
    "SM": {"kind": "sm", "p0": (0.0, 30.0, 10.0), "amplitude": 2.0, "period": 14.0, "drift": 3.0},
}

# published mean misses, kept for side-by-side output
REFERENCE_TABLE = {"CV": (0.71, 0.09), "CA": (0.92, 0.45), "SM": (0.31, 0.04)}  # (pg, proposed) m


def maneuver_scenario(name: str, base: ScenarioConfig | None = None, seed: int = 0,
                      controller: str = "proposed") -> ScenarioConfig:
    """Engagement against one of the maneuvering targets, heading pointed at it."""
    if name not in MANEUVERS:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(MANEUVERS)}")
    base = base or ScenarioConfig()
    tgt = MANEUVERS[name]
    p0 = np.asarray(base.initial.position, dtype=float)
    d = np.asarray(tgt["p0"], dtype=float) - p0
    return base.with_updates(seed=seed, controller=controller, target=tgt,
                             initial={"yaw": -math.atan2(d[0], d[1])})


@dataclass
class CompareRow:
    scenario: str
    seeds: list[int]
    pg: list[float]
    proposed: list[float]
    pg_mean: float
    proposed_mean: float
    ratio: float
    ordering_ok: bool
    ref_pg: float
    ref_proposed: float


@dataclass
class CompareTable:
    rows: list[CompareRow]

    @property
    def ordering_ok(self) -> bool:
        return all(r.ordering_ok for r in self.rows)

    def row(self, scenario: str) -> CompareRow:
        for r in self.rows:
            if r.scenario == scenario:
                return r
        raise KeyError(scenario)

    def to_json(self) -> str:
        return json.dumps({"rows": [asdict(r) for r in self.rows], "ordering_ok": self.ordering_ok},
                          indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["scenario", "pg_mean_m", "proposed_mean_m", "ratio", "ordering_ok",
                    "ref_pg_m", "ref_proposed_m"])
        for r in self.rows:
            w.writerow([r.scenario, f"{r.pg_mean:.9g}", f"{r.proposed_mean:.9g}",
                        f"{r.ratio:.9g}", int(r.ordering_ok), r.ref_pg, r.ref_proposed])
        return buf.getvalue()


def compare_table(proposed: dict[str, list[RunSummary]], pg: dict[str, list[RunSummary]]) -> CompareTable:
    """Per-scenario mean miss of both controllers, their ratio and the ordering flag."""
    if set(proposed) != set(pg):
        raise ValueError("both variants must cover the same scenarios")
    rows = []
    for name in sorted(proposed):
        a, b = proposed[name], pg[name]
        seeds_a, seeds_b = [s.seed for s in a], [s.seed for s in b]
        if seeds_a != seeds_b or not seeds_a:
            raise ValueError(f"mismatched seeds for scenario {name}")
        ma = [s.miss_distance for s in a]
        mb = [s.miss_distance for s in b]
        pa, pb = float(np.mean(ma)), float(np.mean(mb))
        ref = REFERENCE_TABLE.get(name, (math.nan, math.nan))
        rows.append(CompareRow(name, seeds_a, mb, ma, pb, pa,
                               pa / pb if pb > 0 else math.inf, pa < pb, *ref))
    return CompareTable(rows)


def _summary_only(cfg: ScenarioConfig) -> RunSummary:
    return run(cfg).summary


def run_comparison(base: ScenarioConfig | None = None, seeds=(0, 1, 2),
                   scenarios=tuple(MANEUVERS), jobs: int = 1) -> CompareTable:
    """Fly both controllers through each maneuver with identical seeds."""
    jobs_args = [(maneuver_scenario(n, base, s, c),)
                 for n in scenarios for c in ("proposed", "pg") for s in seeds]
    sums = _map(_summary_only, jobs_args, jobs)
    it = iter(sums)
    proposed, pg = {}, {}
    for n in scenarios:
        proposed[n] = [next(it) for _ in seeds]
        pg[n] = [next(it) for _ in seeds]
    return compare_table(proposed, pg)
