"""Cartesian resampling of per-BS maps, excision, fusion and backhaul metering."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .frontend import RangeAngleMap
from .scenario import Box, BsConfig


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid; cell (ix, iy) is centred at (x0 + ix*dx, y0 + iy*dy)."""

    x0: float
    y0: float
    dx: float
    dy: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.dx <= 0 or self.dy <= 0 or self.nx < 1 or self.ny < 1:
            raise ValueError("grid spacing and size must be positive")

    @classmethod
    def covering(cls, box: Box, dx: float = 0.1, dy: float = 0.1, pad: float = 5.0) -> "GridSpec":
        x0, y0 = box.xmin - pad, box.ymin - pad
        nx = int(math.floor((box.xmax + pad - x0) / dx + 1e-9)) + 1
        ny = int(math.floor((box.ymax + pad - y0) / dy + 1e-9)) + 1
        return cls(x0, y0, dx, dy, nx, ny)

    def centers(self, ix, iy) -> np.ndarray:
        ix = np.asarray(ix)
        iy = np.asarray(iy)
        return np.stack([self.x0 + ix * self.dx, self.y0 + iy * self.dy], axis=-1)

    def index_of(self, xy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nearest-cell indices and an in-grid mask."""
        xy = np.asarray(xy, dtype=float)
        ix = np.floor((xy[..., 0] - self.x0) / self.dx + 0.5).astype(np.int64)
        iy = np.floor((xy[..., 1] - self.y0) / self.dy + 0.5).astype(np.int64)
        ok = (ix >= 0) & (ix < self.nx) & (iy >= 0) & (iy < self.ny)
        return ix, iy, ok


@dataclass
class CartesianMap:
    grid: GridSpec
    ix: np.ndarray
    iy: np.ndarray
    values: np.ndarray
    bs: int = 0
    t: int = 0

    def __post_init__(self):
        self.ix = np.asarray(self.ix, dtype=np.int64)
        self.iy = np.asarray(self.iy, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if not (len(self.ix) == len(self.iy) == len(self.values)):
            raise ValueError("index and value arrays differ in length")
        if len(self.ix) and (self.ix.min() < 0 or self.ix.max() >= self.grid.nx
                             or self.iy.min() < 0 or self.iy.max() >= self.grid.ny):
            raise ValueError("cell index outside grid")
        if np.any(self.values < 0):
            raise ValueError("intensities must be nonnegative")

    def __len__(self):
        return len(self.values)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.grid.nx, self.grid.ny))
        out[self.ix, self.iy] = self.values
        return out

    def to_bytes(self) -> bytes:
        """Sparse exchange record: grid header then (ix u16, iy u16, intensity f32) triples."""
        g = self.grid
        if g.nx > 65536 or g.ny > 65536:
            raise ValueError("grid too large for u16 indices")
        head = struct.pack("<IIddddIII", self.bs, self.t, g.x0, g.y0, g.dx, g.dy, g.nx, g.ny, len(self))
        rec = np.empty(len(self), dtype=SPARSE_DTYPE)
        rec["ix"], rec["iy"], rec["v"] = self.ix, self.iy, self.values
        return head + rec.tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "CartesianMap":
        bs, t, x0, y0, dx, dy, nx, ny, n = struct.unpack_from("<IIddddIII", buf, 0)
        rec = np.frombuffer(buf, dtype=SPARSE_DTYPE, offset=struct.calcsize("<IIddddIII"), count=n)
        grid = GridSpec(x0, y0, dx, dy, nx, ny)
        return cls(grid, rec["ix"].astype(np.int64), rec["iy"].astype(np.int64), rec["v"].astype(float), bs, t)


SPARSE_DTYPE = np.dtype([("ix", "<u2"), ("iy", "<u2"), ("v", "<f4")])


@dataclass
class SoftMap:
    """Dense fused map; zero cells are absent."""

    grid: GridSpec
    values: np.ndarray
    t: int = 0

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nonzero cells sorted by (ix, iy)."""
        ix, iy = np.nonzero(self.values > 0)
        return ix, iy, self.values[ix, iy]

    def __len__(self):
        return int(np.count_nonzero(self.values > 0))


@dataclass
class _Lookup:
    cell: np.ndarray     # flat cell index (ix * ny + iy)
    sample: np.ndarray   # flat polar index (row * cols + col)


_LOOKUPS: dict = {}


def _pull_lookup(grid: GridSpec, bs: BsConfig, rows: int, range_bin: float, directions: np.ndarray,
                 extent: Box | None) -> _Lookup:
    key = (grid, bs.position, bs.boresight, rows, range_bin, tuple(np.round(directions, 12)), extent)
    hit = _LOOKUPS.get(key)
    if hit is not None:
        return hit
    ix, iy = np.meshgrid(np.arange(grid.nx), np.arange(grid.ny), indexing="ij")
    xy = grid.centers(ix.ravel(), iy.ravel())
    rel = xy - np.asarray(bs.position)
    r = np.hypot(rel[:, 0], rel[:, 1])
    th = np.angle(np.exp(1j * (np.arctan2(rel[:, 1], rel[:, 0]) - bs.boresight)))
    lo, hi = directions.min(), directions.max()
    step = (hi - lo) / (len(directions) - 1) if len(directions) > 1 else 1.0
    col = np.floor((th - lo) / step + 0.5).astype(np.int64)
    row = np.floor(r / range_bin + 0.5).astype(np.int64)
    ok = (th >= lo - 1e-12) & (th <= hi + 1e-12) & (row < rows) & (r <= bs.max_range)
    if extent is not None:
        ok &= _in_box(xy, extent)
    flat = (ix.ravel() * grid.ny + iy.ravel())[ok]
    lut = _Lookup(flat, row[ok] * len(directions) + np.clip(col[ok], 0, len(directions) - 1))
    if len(_LOOKUPS) > 64:
        _LOOKUPS.clear()
    _LOOKUPS[key] = lut
    return lut


def _in_box(xy: np.ndarray, box: Box) -> np.ndarray:
    return (xy[:, 0] >= box.xmin) & (xy[:, 0] <= box.xmax) & (xy[:, 1] >= box.ymin) & (xy[:, 1] <= box.ymax)


def polar_to_world(m: RangeAngleMap, bs: BsConfig) -> np.ndarray:
    """World coordinates of every polar sample, shape (rows, cols, 2)."""
    ang = bs.boresight + np.asarray(m.directions)
    r = m.ranges
    x = bs.position[0] + np.multiply.outer(r, np.cos(ang))
    y = bs.position[1] + np.multiply.outer(r, np.sin(ang))
    return np.stack([x, y], axis=-1)


def to_cartesian(m: RangeAngleMap, grid: GridSpec, bs: BsConfig, extent: Box | None = None,
                 mode: str = "dense") -> CartesianMap:
    """Resample a polar map onto ``grid`` with nearest-cell max assignment.

    ``mode="splat"`` maps each polar sample forward to its nearest cell only.
    ``mode="dense"`` additionally gives every cell inside the sector the value
    of its nearest polar sample, so beams wider than a cell leave no holes.
    ``extent`` clips the output (cells outside are absent).
    """
    if mode not in ("dense", "splat"):
        raise ValueError(f"unknown resampling mode {mode!r}")
    acc = np.full(grid.nx * grid.ny, -1.0)
    inten = np.asarray(m.intensity, dtype=float)
    if inten.size:
        xy = polar_to_world(m, bs).reshape(-1, 2)
        vals = inten.ravel()
        keep = m.ranges[:, None].repeat(inten.shape[1], axis=1).ravel() <= bs.max_range
        if extent is not None:
            keep &= _in_box(xy, extent)
        ix, iy, ok = grid.index_of(xy)
        ok &= keep
        np.maximum.at(acc, ix[ok] * grid.ny + iy[ok], vals[ok])
        if mode == "dense":
            lut = _pull_lookup(grid, bs, inten.shape[0], m.range_bin, np.asarray(m.directions), extent)
            np.maximum.at(acc, lut.cell, vals[lut.sample])
    cells = np.flatnonzero(acc >= 0)
    return CartesianMap(grid, cells // grid.ny, cells % grid.ny, acc[cells], m.bs, m.t)


def excise(m, gamma: float):
    """Keep only points strictly above ``gamma``."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if isinstance(m, CartesianMap):
        keep = m.values > gamma
        return CartesianMap(m.grid, m.ix[keep], m.iy[keep], m.values[keep], m.bs, m.t)
    if isinstance(m, SoftMap):
        return SoftMap(m.grid, np.where(m.values > gamma, m.values, 0.0), m.t)
    raise TypeError(f"cannot excise {type(m).__name__}")


def fuse(maps: Sequence[CartesianMap], n_s: int, t: int | None = None) -> SoftMap:
    """L_t = (1/N_s) sum_s L_{s,t}; cells missing from a map contribute zero."""
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    if not maps:
        raise ValueError("no maps to fuse")
    grid = maps[0].grid
    for m in maps[1:]:
        if m.grid != grid:
            raise ValueError("maps are on different grids")
    acc = np.zeros((grid.nx, grid.ny))
    for m in maps:
        np.add.at(acc, (m.ix, m.iy), m.values)
    return SoftMap(grid, acc / n_s, maps[0].t if t is None else t)


def overhead_bitrate(points_per_bs, n_b: int, rho_t: float, t_meas: float) -> float:
    """Average backhaul rate R_b = (N_b rho_t / T_meas) * mean_s N_p.

    ``points_per_bs`` may be a flat sequence (one scan) or a 2-D array of
    shape (scans, BSs); the mean is taken over every entry.
    """
    if t_meas <= 0:
        raise ValueError("t_meas must be positive")
    counts = np.asarray(points_per_bs, dtype=float)
    if counts.size == 0:
        return 0.0
    return n_b * rho_t / t_meas * float(counts.mean())
