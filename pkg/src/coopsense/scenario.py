"""Urban crossroad world: BS ring, scripted targets and their scatterer layouts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


class ConfigError(ValueError):
    """Raised when a scenario or run description is inconsistent."""


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@dataclass(frozen=True)
class TargetState:
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy])


@dataclass(frozen=True)
class Visibility:
    """Angular interval [lo, hi] (radians, wrap-aware). ``None`` bounds mean isotropic."""

    lo: Optional[float] = None
    hi: Optional[float] = None

    @classmethod
    def about(cls, center: float, halfwidth: float) -> "Visibility":
        if halfwidth >= math.pi:
            return cls()
        return cls(wrap_angle(center - halfwidth), wrap_angle(center + halfwidth))

    @property
    def isotropic(self) -> bool:
        return self.lo is None

    def rotated(self, angle: float) -> "Visibility":
        if self.isotropic:
            return self
        return Visibility(wrap_angle(self.lo + angle), wrap_angle(self.hi + angle))


ISOTROPIC = Visibility()


def is_visible(vis: Visibility, psi: float) -> bool:
    """True iff ``psi`` falls inside the (possibly wrapping) interval."""
    if vis.isotropic:
        return True
    psi = wrap_angle(psi)
    lo, hi = vis.lo, vis.hi
    if lo <= hi:
        return lo <= psi <= hi
    return psi >= lo or psi <= hi


@dataclass(frozen=True)
class ScattererSpec:
    body_offset: tuple[float, float]
    mean_rcs: float
    visibility: Visibility = ISOTROPIC
    label: str = ""

    def __post_init__(self):
        if not self.mean_rcs > 0:
            raise ConfigError(f"scatterer mean_rcs must be positive, got {self.mean_rcs}")


@dataclass(frozen=True)
class CarLayout:
    length: float = 4.6
    width: float = 1.8
    wheel_x: float = 1.4
    side_rcs_dbsm: float = 20.0
    wheel_rcs_dbsm: float = 0.0
    corner_rcs_dbsm: float = 5.0
    side_halfwidth_deg: float = 80.0
    corner_halfwidth_deg: float = 135.0
    wheel_halfwidth_deg: float = 60.0


@dataclass(frozen=True)
class TargetModel:
    kind: str
    scatterers: tuple[ScattererSpec, ...]

    def __post_init__(self):
        if not self.scatterers:
            raise ConfigError("target model needs at least one scatterer")
        if self.kind == "pedestrian":
            if len(self.scatterers) != 1 or not self.scatterers[0].visibility.isotropic:
                raise ConfigError("pedestrian must have exactly one isotropic scatterer")
        elif self.kind == "car":
            if len(self.scatterers) != 12:
                raise ConfigError("car must have exactly 12 scatterers")
        else:
            raise ConfigError(f"unknown target kind {self.kind!r}")


def dbsm(x: float) -> float:
    return 10.0 ** (x / 10.0)


def pedestrian_model(rcs_dbsm: float = 0.0) -> TargetModel:
    return TargetModel("pedestrian", (ScattererSpec((0.0, 0.0), dbsm(rcs_dbsm), ISOTROPIC, "body"),))


def car_model(layout: CarLayout = CarLayout()) -> TargetModel:
    hl, hw = layout.length / 2.0, layout.width / 2.0
    side = dbsm(layout.side_rcs_dbsm)
    wheel = dbsm(layout.wheel_rcs_dbsm)
    corner = dbsm(layout.corner_rcs_dbsm)
    sh = math.radians(layout.side_halfwidth_deg)
    ch = math.radians(layout.corner_halfwidth_deg)
    wh = math.radians(layout.wheel_halfwidth_deg)
    sc = []
    # sides at edge midpoints, normals front/back/left/right
    for (ox, oy), normal, name in [((hl, 0.0), 0.0, "front"), ((-hl, 0.0), math.pi, "back"),
                                   ((0.0, hw), math.pi / 2, "left"), ((0.0, -hw), -math.pi / 2, "right")]:
        sc.append(ScattererSpec((ox, oy), side, Visibility.about(normal, sh), name))
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            sc.append(ScattererSpec((sx * layout.wheel_x, sy * hw), wheel,
                                    Visibility.about(sy * math.pi / 2, wh), "wheelhouse"))
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            diag = math.atan2(sy * hw, sx * hl)
            sc.append(ScattererSpec((sx * hl, sy * hw), corner, Visibility.about(diag, ch), "corner"))
    return TargetModel("car", tuple(sc))


@dataclass(frozen=True)
class BsConfig:
    position: tuple[float, float]
    boresight: float
    n_tx: int = 50
    n_rx: int = 50
    eirp: float = 1.0
    scan_halfwidth: float = math.radians(60.0)
    scan_step: float = math.radians(2.4)
    max_range: float = 85.0
    ue_angle: float = math.radians(60.0)
    index: int = 0

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ConfigError("antenna counts must be >= 1")
        if not (0 < self.scan_step <= 2 * self.scan_halfwidth):
            raise ConfigError("scan step must satisfy 0 < step <= 2*halfwidth")
        if self.max_range <= 0:
            raise ConfigError("max_range must be positive")

    @property
    def directions(self) -> np.ndarray:
        """Sensing directions relative to boresight."""
        n = int(math.floor(2 * self.scan_halfwidth / self.scan_step + 1e-9)) + 1
        return -self.scan_halfwidth + self.scan_step * np.arange(n)

    def local_angle(self, point) -> float:
        """Bearing of a world point relative to the array boresight, in (-pi, pi]."""
        dx = point[0] - self.position[0]
        dy = point[1] - self.position[1]
        return wrap_angle(math.atan2(dy, dx) - self.boresight)


@dataclass(frozen=True)
class MotionSegment:
    kind: str
    duration: float
    acceleration: float = 0.0
    omega: float = 0.0
    center: Optional[tuple[float, float]] = None
    heading: Optional[float] = None

    KINDS = ("static", "uniform-linear", "accelerated-linear", "uniform-circular")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown motion kind {self.kind!r}")
        if not self.duration > 0:
            raise ConfigError("segment duration must be positive")


def advance(state: TargetState, segment: MotionSegment, dt: float) -> TargetState:
    """Exact kinematics over ``dt`` seconds inside one segment."""
    if segment.kind == "static":
        return TargetState(state.x, state.y, 0.0, 0.0)
    if segment.kind == "uniform-linear":
        return TargetState(state.x + state.vx * dt, state.y + state.vy * dt, state.vx, state.vy)
    if segment.kind == "accelerated-linear":
        s = state.speed
        if s > 0.0:
            ux, uy = state.vx / s, state.vy / s
        elif segment.heading is not None:
            ux, uy = math.cos(segment.heading), math.sin(segment.heading)
        else:
            return state
        a = segment.acceleration
        if a <= 0 and s == 0.0:
            return state
        if a < 0 and s + a * dt < 0:
            t_stop = -s / a
            dist = s * t_stop + 0.5 * a * t_stop ** 2
            return TargetState(state.x + ux * dist, state.y + uy * dist, 0.0, 0.0)
        dist = s * dt + 0.5 * a * dt * dt
        s1 = s + a * dt
        return TargetState(state.x + ux * dist, state.y + uy * dist, ux * s1, uy * s1)
    # uniform-circular
    if segment.center is None:
        raise ConfigError("circular segment needs a resolved center")
    cx, cy = segment.center
    w = segment.omega
    rx, ry = state.x - cx, state.y - cy
    c, s = math.cos(w * dt), math.sin(w * dt)
    nx, ny = c * rx - s * ry, s * rx + c * ry
    return TargetState(cx + nx, cy + ny, -w * ny, w * nx)


def _resolve_center(state: TargetState, segment: MotionSegment) -> MotionSegment:
    if segment.kind != "uniform-circular" or segment.center is not None:
        return segment
    s = state.speed
    if s == 0.0 or segment.omega == 0.0:
        raise ConfigError("circular segment without center needs nonzero speed and omega")
    radius = s / abs(segment.omega)
    # center on the left for counter-clockwise turns
    sign = 1.0 if segment.omega > 0 else -1.0
    nx, ny = -state.vy / s * sign, state.vx / s * sign
    return replace(segment, center=(state.x + radius * nx, state.y + radius * ny))


@dataclass(frozen=True)
class Target:
    model: TargetModel
    initial: TargetState
    script: tuple[MotionSegment, ...] = ()
    heading: Optional[float] = None
    spawn: float = 0.0
    despawn: Optional[float] = None
    name: str = ""

    def active(self, t: float) -> bool:
        return t >= self.spawn and (self.despawn is None or t < self.despawn)

    def _segments(self):
        """Yield (start_time, start_state, start_heading, resolved segment)."""
        state = self.initial
        heading = self.heading if self.heading is not None else math.atan2(state.vy, state.vx)
        t0 = self.spawn
        for seg in self.script:
            if seg.kind == "uniform-circular":
                seg = _resolve_center(state, seg)
                # velocity follows the circle from the first instant
                state = advance(state, seg, 0.0)
            elif seg.kind == "static":
                state = TargetState(state.x, state.y, 0.0, 0.0)
            elif seg.kind == "accelerated-linear" and seg.heading is None:
                seg = replace(seg, heading=heading)
            yield t0, state, heading, seg
            state = advance(state, seg, seg.duration)
            if state.speed > 0:
                heading = math.atan2(state.vy, state.vx)
            t0 += seg.duration

    def state_at(self, t: float) -> tuple[TargetState, float]:
        """Kinematic state and body heading at absolute time ``t``."""
        state = self.initial
        heading = self.heading if self.heading is not None else math.atan2(state.vy, state.vx)
        last = None
        for t0, s0, h0, seg in self._segments():
            last = (t0, s0, h0, seg)
            if t < t0 + seg.duration:
                break
        if last is None:
            dt = max(t - self.spawn, 0.0)
            s = TargetState(state.x + state.vx * dt, state.y + state.vy * dt, state.vx, state.vy)
            return s, heading
        t0, s0, h0, seg = last
        dt = max(t - t0, 0.0)
        if dt > seg.duration:
            # past the script end: continue with constant velocity
            s_end = advance(s0, seg, seg.duration)
            extra = dt - seg.duration
            s = TargetState(s_end.x + s_end.vx * extra, s_end.y + s_end.vy * extra, s_end.vx, s_end.vy)
        else:
            s = advance(s0, seg, dt) if dt > 0 else s0
        h = math.atan2(s.vy, s.vx) if s.speed > 0 else h0
        return s, h


@dataclass(frozen=True)
class ScattererPose:
    position: np.ndarray
    visibility: Visibility
    mean_rcs: float
    velocity: np.ndarray
    target: int = -1
    index: int = 0


def scatterer_poses(state: TargetState, model: TargetModel, heading: Optional[float] = None,
                    target: int = -1) -> list[ScattererPose]:
    """Rigid-body placement of the model's scatterers in the world frame."""
    if heading is None:
        heading = math.atan2(state.vy, state.vx) if state.speed > 0 else 0.0
    c, s = math.cos(heading), math.sin(heading)
    out = []
    for i, sc in enumerate(model.scatterers):
        ox, oy = sc.body_offset
        pos = np.array([state.x + c * ox - s * oy, state.y + s * ox + c * oy])
        out.append(ScattererPose(pos, sc.visibility.rotated(heading), sc.mean_rcs,
                                 state.velocity, target, i))
    return out


@dataclass(frozen=True)
class Box:
    xmin: float = -20.0
    xmax: float = 20.0
    ymin: float = -20.0
    ymax: float = 20.0

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


@dataclass(frozen=True)
class Scenario:
    stations: tuple[BsConfig, ...]
    targets: tuple[Target, ...]
    box: Box = field(default_factory=Box)

    def truth(self, t: float) -> list[tuple[int, TargetState, float]]:
        """Active targets inside the surveillance box at time ``t``."""
        out = []
        for i, tg in enumerate(self.targets):
            if not tg.active(t):
                continue
            s, h = tg.state_at(t)
            if self.box.contains(s.x, s.y):
                out.append((i, s, h))
        return out

    def scatterers(self, t: float) -> list[ScattererPose]:
        """All scatterers of active targets (inside or outside the box)."""
        out = []
        for i, tg in enumerate(self.targets):
            if not tg.active(t):
                continue
            s, h = tg.state_at(t)
            out.extend(scatterer_poses(s, tg.model, h, target=i))
        return out


def bs_ring(n_s: int = 6, radius: float = 50.0, **bs_kwargs) -> tuple[BsConfig, ...]:
    """``n_s`` stations equally spaced on a circle, arrays tangent, boresight to the center."""
    if n_s < 1:
        raise ConfigError("need at least one base station")
    if not radius > 0:
        raise ConfigError("ring radius must be positive")
    out = []
    for s in range(n_s):
        ang = 2.0 * math.pi * s / n_s
        pos = (radius * math.cos(ang), radius * math.sin(ang))
        out.append(BsConfig(position=pos, boresight=wrap_angle(ang + math.pi), index=s, **bs_kwargs))
    pts = np.array([b.position for b in out])
    if n_s > 1:
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        d[np.diag_indices(n_s)] = np.inf
        if d.min() < 1e-6:
            raise ConfigError("base stations overlap")
    return tuple(out)


def select_stations(stations: Sequence[BsConfig], n: int) -> tuple[BsConfig, ...]:
    """Pick ``n`` of the ring's stations spread as evenly as possible."""
    total = len(stations)
    if not 1 <= n <= total:
        raise ConfigError(f"cannot select {n} of {total} stations")
    idx = sorted({int(math.floor(i * total / n)) for i in range(n)})
    return tuple(stations[i] for i in idx)
