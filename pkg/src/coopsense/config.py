"""Run configuration: YAML schema, validation and construction of library objects."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .channel import MultipathEnv, NO_MULTIPATH, OfdmConfig, sensing_subcarriers
from .clustering import ClusterParams
from .frontend import Resources
from .scenario import (Box, ConfigError, MotionSegment, Scenario, Target, TargetState, bs_ring, car_model,
                       pedestrian_model, select_stations)
from .tracking import BirthComponent, BirthModel, MbmParams, MeasurementModel, MotionModel, PhdParams


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SegmentCfg(_Strict):
    kind: Literal["static", "uniform-linear", "accelerated-linear", "uniform-circular"]
    duration: float = Field(gt=0)
    acceleration: float = 0.0
    omega: float = 0.0
    center: Optional[tuple[float, float]] = None


class TargetCfg(_Strict):
    kind: Literal["pedestrian", "car"]
    initial: tuple[float, float, float, float]
    heading_deg: Optional[float] = None
    spawn: float = Field(0.0, ge=0)
    despawn: Optional[float] = None
    script: list[SegmentCfg] = []
    name: str = ""


class StationCfg(_Strict):
    n_tx: int = Field(50, ge=1)
    n_rx: int = Field(50, ge=1)
    eirp_dbm: float = 30.0
    scan_halfwidth_deg: float = Field(60.0, gt=0, le=90)
    scan_step_deg: float = Field(2.4, gt=0)
    max_range: float = Field(85.0, gt=0)
    ue_angle_deg: float = 60.0


class ScenarioCfg(_Strict):
    ring_size: int = Field(6, ge=1)
    n_s: Optional[int] = Field(None, ge=1)
    radius: float = Field(50.0, gt=0)
    box: tuple[float, float, float, float] = (-20.0, 20.0, -20.0, 20.0)
    station: StationCfg = StationCfg()
    targets: list[TargetCfg] = []

    @model_validator(mode="after")
    def _check(self):
        if self.n_s is not None and self.n_s > self.ring_size:
            raise ValueError("n_s cannot exceed ring_size")
        x0, x1, y0, y1 = self.box
        if not (x0 < x1 and y0 < y1):
            raise ValueError("box must be (xmin, xmax, ymin, ymax) with positive extent")
        return self


class OfdmCfg(_Strict):
    f_c: float = Field(28e9, gt=0)
    delta_f: float = Field(120e3, gt=0)
    k0: int = Field(3168, ge=1)
    m_s: int = Field(112, ge=1)
    n0: float = Field(4e-20, gt=0)
    cp_fraction: float = Field(0.0, ge=0)


class ResourcesCfg(_Strict):
    rho_p: float = Field(0.4, ge=0, le=1)
    rho_f: float = Field(0.6, gt=0, le=1)
    rho_t: float = Field(1.0, gt=0, le=1)


class ChannelCfg(_Strict):
    multipath: bool = True
    n_paths: int = Field(6, ge=1)
    k_factor_db: float = 10.0
    delay_spread: float = Field(50e-9, gt=0)
    angle_spread_deg: float = Field(10.0, ge=0)
    doppler_jitter: float = Field(10.0, ge=0)
    persistent: bool = True


class FrontendCfg(_Strict):
    pad: int = Field(4, ge=1)
    method: Literal["fast", "direct"] = "fast"
    swerling: bool = True
    noise: bool = True


class FusionCfg(_Strict):
    dx: float = Field(0.1, gt=0)
    dy: float = Field(0.1, gt=0)
    extent_pad: float = Field(5.0, ge=0)
    gamma_s: float = Field(0.0, ge=0)
    n_b: int = Field(16, ge=1)


class ClusteringCfg(_Strict):
    gamma_d: float = Field(2e-7, ge=0)
    xi_nn: float = Field(5.0, gt=0)
    xi_d: float = Field(3.0, gt=0)
    n_d: int = Field(50, ge=1)
    weighted: bool = False


class BirthCfg(_Strict):
    positions: list[tuple[float, float]] = []
    recovery: Optional[tuple[float, float]] = (0.0, 0.0)
    phd_weight: float = Field(0.1, ge=0)
    phd_cov: float = Field(0.1, gt=0)
    phd_recovery_weight: float = Field(0.01, ge=0)
    phd_recovery_cov: float = Field(5.0, gt=0)
    mbm_existence: float = Field(1e-4, ge=0, le=1)
    mbm_cov: float = Field(0.1, gt=0)
    mbm_recovery_existence: float = Field(1e-5, ge=0, le=1)
    mbm_recovery_cov: float = Field(5.0, gt=0)


class TrackingCfg(_Strict):
    tracker: Literal["phd", "mbm", "both"] = "both"
    alpha_q: float = Field(5.0, ge=0)
    p_s: float = Field(0.9, ge=0, le=1)
    p_d: float = Field(0.99, ge=0, le=1)
    lambda_c: float = Field(0.1, gt=0)
    gamma_p: float = Field(1e-4, ge=0)
    gamma_q: int = Field(10, ge=1)
    gamma_v: float = Field(5.0, ge=0)
    xi_a: float = Field(14.0, gt=0)
    gamma_e: float = Field(0.99, ge=0, le=1)
    gamma_g: float = Field(1e-15, ge=0)
    gamma_l: float = Field(1e-4, ge=0)
    gamma_c: int = Field(10, ge=1)
    gamma_m: float = Field(5.0, ge=0)
    births: BirthCfg = BirthCfg()


class MetricsCfg(_Strict):
    ospa_p: float = Field(2.0, ge=1)
    xi_g: float = Field(5.0, gt=0)
    snr_c_db: float = 8.0


class ExperimentCfg(_Strict):
    t_scan: float = Field(0.05, gt=0)
    duration: float = Field(10.0, gt=0)
    n_scans: Optional[int] = Field(None, ge=1)
    monte_carlo: int = Field(1, ge=1)
    burn_in: int = Field(10, ge=0)
    workers: int = Field(1, ge=1)


class RunConfig(_Strict):
    seed: int = Field(0, ge=0)
    scenario: ScenarioCfg = ScenarioCfg()
    ofdm: OfdmCfg = OfdmCfg()
    resources: ResourcesCfg = ResourcesCfg()
    channel: ChannelCfg = ChannelCfg()
    frontend: FrontendCfg = FrontendCfg()
    fusion: FusionCfg = FusionCfg()
    clustering: ClusteringCfg = ClusteringCfg()
    tracking: TrackingCfg = TrackingCfg()
    metrics: MetricsCfg = MetricsCfg()
    experiment: ExperimentCfg = ExperimentCfg()

    # ---- derived quantities -------------------------------------------------
    @property
    def t_meas(self) -> float:
        return self.experiment.t_scan / self.resources.rho_t

    @property
    def n_scans(self) -> int:
        if self.experiment.n_scans is not None:
            return self.experiment.n_scans
        return max(1, int(math.floor(self.experiment.duration / self.t_meas + 1e-9)))

    @property
    def trackers(self) -> tuple[str, ...]:
        t = self.tracking.tracker
        return ("phd", "mbm") if t == "both" else (t,)

    def with_value(self, param: str, value) -> "RunConfig":
        """Copy with one sweepable parameter replaced."""
        if param in ("rho_p", "rho_f", "rho_t"):
            return self.model_copy(update={"resources": self.resources.model_copy(update={param: float(value)})})
        if param == "gamma_s":
            return self.model_copy(update={"fusion": self.fusion.model_copy(update={"gamma_s": float(value)})})
        if param == "n_s":
            n = int(value)
            if float(n) != float(value):
                raise ConfigError("n_s must be an integer")
            sc = self.scenario
            ring = max(sc.ring_size, n)
            return self.model_copy(update={"scenario": sc.model_copy(update={"n_s": n, "ring_size": ring})})
        raise ConfigError(f"unknown sweep parameter {param!r}")

    def validated(self) -> "RunConfig":
        """Re-run validation (model_copy skips it)."""
        return parse_config(self.model_dump())

    # ---- object construction -----------------------------------------------
    def build_scenario(self) -> Scenario:
        sc = self.scenario
        st = sc.station
        ring = bs_ring(sc.ring_size, sc.radius, n_tx=st.n_tx, n_rx=st.n_rx, eirp=10 ** ((st.eirp_dbm - 30) / 10),
                       scan_halfwidth=math.radians(st.scan_halfwidth_deg), scan_step=math.radians(st.scan_step_deg),
                       max_range=st.max_range, ue_angle=math.radians(st.ue_angle_deg))
        stations = select_stations(ring, sc.n_s) if sc.n_s is not None else ring
        targets = []
        for tc in sc.targets:
            model = pedestrian_model() if tc.kind == "pedestrian" else car_model()
            script = tuple(MotionSegment(s.kind, s.duration, s.acceleration, s.omega, s.center) for s in tc.script)
            heading = None if tc.heading_deg is None else math.radians(tc.heading_deg)
            targets.append(Target(model, TargetState(*tc.initial), script, heading, tc.spawn, tc.despawn,
                                  tc.name or f"{tc.kind}{len(targets)}"))
        x0, x1, y0, y1 = sc.box
        return Scenario(tuple(stations), tuple(targets), Box(x0, x1, y0, y1))

    def build_ofdm(self) -> OfdmConfig:
        o = self.ofdm
        k_s = sensing_subcarriers(self.resources.rho_f, o.k0)
        return OfdmConfig(o.f_c, o.delta_f, o.k0, k_s, o.m_s, (1 + o.cp_fraction) / o.delta_f, o.n0)

    def build_resources(self) -> Resources:
        r = self.resources
        return Resources(r.rho_p, r.rho_f, r.rho_t)

    def build_env(self) -> MultipathEnv:
        c = self.channel
        if not c.multipath:
            return NO_MULTIPATH
        return MultipathEnv(c.n_paths, c.k_factor_db, c.delay_spread, math.radians(c.angle_spread_deg),
                            c.doppler_jitter, c.persistent)

    def build_cluster_params(self) -> ClusterParams:
        c = self.clustering
        return ClusterParams(c.gamma_d, c.xi_nn, c.xi_d, c.n_d, c.weighted)

    def build_models(self) -> tuple[MotionModel, MeasurementModel]:
        t = self.tracking
        return MotionModel(self.t_meas, t.alpha_q, t.p_s), MeasurementModel(t.p_d, t.lambda_c)

    def build_births(self, kind: str) -> BirthModel:
        b = self.tracking.births
        if kind == "phd":
            w, cov, rw, rcov = b.phd_weight, b.phd_cov, b.phd_recovery_weight, b.phd_recovery_cov
        else:
            w, cov, rw, rcov = b.mbm_existence, b.mbm_cov, b.mbm_recovery_existence, b.mbm_recovery_cov
        lanes = tuple(BirthComponent(w, tuple(p), cov) for p in b.positions)
        rec = None if b.recovery is None else BirthComponent(rw, tuple(b.recovery), rcov)
        return BirthModel(lanes, rec)

    def build_phd_params(self) -> PhdParams:
        t = self.tracking
        return PhdParams(t.gamma_p, t.gamma_q, t.gamma_v)

    def build_mbm_params(self) -> MbmParams:
        t = self.tracking
        return MbmParams(t.xi_a, t.gamma_e, t.gamma_g, t.gamma_l, t.gamma_c, t.gamma_m)


def format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict | None) -> RunConfig:
    try:
        return RunConfig.model_validate(data or {})
    except ValidationError as err:
        raise ConfigError("invalid configuration\n" + format_errors(err)) from None


def load_config(path: str | Path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)


def desk_config(seed: int = 0, multipath: bool = False, n_scans: int = 40, tracker: str = "both",
                lambda_c: float = 1e-3) -> RunConfig:
    """Small reproducible scenario: two pedestrians and one car seen by three stations."""
    targets = [
        {"kind": "pedestrian", "initial": (-8.0, -6.0, 1.2, 0.0), "script": [
            {"kind": "uniform-linear", "duration": 10.0}]},
        {"kind": "pedestrian", "initial": (6.0, 8.0, 0.0, -1.0), "script": [
            {"kind": "uniform-linear", "duration": 10.0}]},
        {"kind": "car", "initial": (-10.0, 3.0, 5.0, 0.0), "script": [
            {"kind": "uniform-linear", "duration": 10.0}]},
    ]
    data = {
        "seed": seed,
        "scenario": {"ring_size": 6, "n_s": 3, "targets": targets},
        "channel": {"multipath": multipath},
        "resources": {"rho_p": 0.4, "rho_f": 0.6, "rho_t": 1.0},
        "tracking": {"tracker": tracker, "lambda_c": lambda_c, "births": {"positions": [t["initial"][:2] for t in targets]}},
        "experiment": {"n_scans": n_scans, "burn_in": 10},
    }
    return parse_config(data)


def crossroad_config(seed: int = 0) -> RunConfig:
    """Six stations watching a crossroad with pedestrians on the crosswalks and cars in the lanes."""
    targets = [
        {"kind": "pedestrian", "initial": (-12.0, -9.0, 1.3, 0.0), "script": [
            {"kind": "uniform-linear", "duration": 6.0}, {"kind": "static", "duration": 2.0},
            {"kind": "accelerated-linear", "duration": 2.0, "acceleration": 0.5}]},
        {"kind": "pedestrian", "initial": (9.0, 12.0, 0.0, -1.1), "script": [
            {"kind": "uniform-linear", "duration": 10.0}]},
        {"kind": "car", "initial": (-18.0, 2.0, 4.0, 0.0), "script": [
            {"kind": "accelerated-linear", "duration": 3.0, "acceleration": 1.0},
            {"kind": "uniform-circular", "duration": 2.0, "omega": 0.5},
            {"kind": "uniform-linear", "duration": 5.0}]},
        {"kind": "car", "initial": (2.0, 18.0, 0.0, -6.0), "script": [
            {"kind": "accelerated-linear", "duration": 4.0, "acceleration": -1.5},
            {"kind": "static", "duration": 3.0},
            {"kind": "accelerated-linear", "duration": 3.0, "acceleration": 1.5}]},
    ]
    births = [(-12.0, -9.0), (12.0, -9.0), (9.0, 12.0), (-9.0, 12.0), (-18.0, 2.0), (18.0, -2.0),
              (2.0, 18.0), (-2.0, -18.0)]
    data = {"seed": seed, "scenario": {"targets": targets},
            "tracking": {"births": {"positions": births}}}
    return parse_config(data)
