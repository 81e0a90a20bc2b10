"""Per-BS range-angle maps from beam-scanned OFDM sensing slots."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .channel import (MultipathEnv, OfdmConfig, PathSet, path_terms, response_grid, steering_vector,
                      synth_paths, term_beam_gains)
from .scenario import BsConfig, ScattererPose


@dataclass(frozen=True)
class Resources:
    rho_p: float = 0.4
    rho_f: float = 0.6
    rho_t: float = 1.0

    def __post_init__(self):
        for name in ("rho_p", "rho_f", "rho_t"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.rho_f == 0 or self.rho_t == 0:
            raise ValueError("sensing needs rho_f > 0 and rho_t > 0")


@dataclass
class RangeAngleMap:
    intensity: np.ndarray          # (range bins, directions), V^2/Hz
    range_bin: float               # meters per (padded) bin
    directions: np.ndarray         # radians relative to boresight
    bs: int = 0
    t: int = 0

    @property
    def ranges(self) -> np.ndarray:
        return self.range_bin * np.arange(self.intensity.shape[0])

    def to_bytes(self) -> bytes:
        rows, cols = self.intensity.shape
        head = struct.pack("<IIII", self.bs, self.t, rows, cols)
        return head + np.ascontiguousarray(self.intensity, dtype="<f4").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes, range_bin: float = float("nan"), directions=None) -> "RangeAngleMap":
        bs, t, rows, cols = struct.unpack_from("<IIII", buf, 0)
        data = np.frombuffer(buf, dtype="<f4", offset=16, count=rows * cols).reshape(rows, cols)
        if directions is None:
            directions = np.full(cols, np.nan)
        return cls(data.astype(float), range_bin, np.asarray(directions), bs, t)


def tx_beamformer(theta_s: float, theta_c: float, rho_p: float, eirp: float, n_t: int) -> np.ndarray:
    """Power-split transmit beam: sqrt(rho_p) w_s + sqrt(1 - rho_p) w_c."""
    if not 0.0 <= rho_p <= 1.0:
        raise ValueError("rho_p must lie in [0, 1]")
    scale = math.sqrt(eirp) / n_t
    w_s = scale * np.conj(steering_vector(theta_s, n_t))
    w_c = scale * np.conj(steering_vector(theta_c, n_t))
    return math.sqrt(rho_p) * w_s + math.sqrt(1.0 - rho_p) * w_c


def rx_combiner(theta_s, n_r: int) -> np.ndarray:
    return np.conj(steering_vector(theta_s, n_r))


def qpsk(rng: np.random.Generator, shape) -> np.ndarray:
    bits = rng.integers(0, 2, size=(2,) + tuple(shape))
    return ((2 * bits[0] - 1) + 1j * (2 * bits[1] - 1)) / math.sqrt(2)


def geometry_rng(key: tuple, bs: BsConfig, pose: ScattererPose) -> np.random.Generator:
    """Stream for the diffuse geometry of one (station, target, scatterer) under ``key = (seed, run)``."""
    seed, run = key
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run, 1 << 20, bs.index,
                                                                         pose.target + 1, pose.index)))


def paths_for(bs: BsConfig, scatterers: Sequence[ScattererPose], env: MultipathEnv,
              rng: np.random.Generator, f_c: float, mean_rcs: bool = True,
              geometry_key: Optional[tuple] = None) -> list[PathSet]:
    """Path sets for the scatterers within the station's maximum range.

    With ``env.persistent`` and a ``geometry_key`` the diffuse geometry of each
    scatterer is fixed for the whole run; otherwise it is redrawn from ``rng``.
    """
    out = []
    for i, sp in enumerate(scatterers):
        d = float(np.hypot(*(sp.position - np.asarray(bs.position))))
        if d > bs.max_range or d == 0.0:
            continue
        rcs = sp.mean_rcs if mean_rcs else None
        geo = geometry_rng(geometry_key, bs, sp) if (env.persistent and geometry_key is not None) else None
        out.append(synth_paths(bs, sp, env, rng, f_c, rcs=rcs, scatterer=i, geometry=geo))
    return out


def simulate_direction(pathsets: Sequence[PathSet], bs: BsConfig, theta_s: float, theta_c: float,
                       resources: Resources, ofdm: OfdmConfig, rng: np.random.Generator,
                       noise: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Transmit QPSK grid X and post-combining received grid Y for one direction."""
    if abs(theta_s) > bs.scan_halfwidth + 1e-9:
        raise ValueError("sensing direction outside the scan sector")
    x = qpsk(rng, (ofdm.k_s, ofdm.m_s))
    w_t = tx_beamformer(theta_s, theta_c, resources.rho_p, bs.eirp, bs.n_tx)
    w_r = rx_combiner(theta_s, bs.n_rx)
    y = response_grid(pathsets, w_t, w_r, ofdm) * x
    if noise:
        var = bs.n_rx * ofdm.noise_variance
        y = y + math.sqrt(var / 2) * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return x, y


def reciprocal_filter(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    if y.shape != x.shape:
        raise ValueError("grid shapes differ")
    if np.any(x == 0):
        raise ValueError("transmit grid contains zero symbols")
    return y / x


def range_doppler_periodogram(g: np.ndarray, pad: int = 4, doppler_pad: int = 1) -> np.ndarray:
    """|IDFT_k DFT_m g|^2 / (K_s M_s); rows are delay bins, columns Doppler bins."""
    k_s, m_s = g.shape
    n = pad * k_s
    r = np.fft.ifft(g, n=n, axis=0) * n
    r = np.fft.fft(r, n=doppler_pad * m_s, axis=1)
    return (r.real ** 2 + r.imag ** 2) / (k_s * m_s)


def n_range_bins(ofdm: OfdmConfig, pad: int, max_range: float) -> int:
    return int(math.floor(max_range / (ofdm.range_bin / pad))) + 1


def _dirichlet(phi: np.ndarray, n: int) -> np.ndarray:
    """sum_{k<n} exp(i phi k), stable near multiples of 2 pi."""
    phi = np.remainder(phi + np.pi, 2 * np.pi) - np.pi
    half = phi / 2
    s = np.sin(half)
    small = np.abs(s) < 1e-12
    ratio = np.where(small, float(n), np.sin(n * half) / np.where(small, 1.0, s))
    return np.exp(1j * half * (n - 1)) * ratio


@lru_cache(maxsize=32)
def _noise_factor(k_s: int, pad: int, rows: int) -> np.ndarray:
    """Low-rank factor L with L L^H = covariance of truncated padded-IDFT white noise."""
    lag = np.arange(rows)
    n = pad * k_s
    col = _dirichlet(2 * np.pi * lag / n, k_s) / k_s
    idx = lag[:, None] - lag[None, :]
    cov = np.where(idx >= 0, col[np.abs(idx)], np.conj(col[np.abs(idx)]))
    w, v = np.linalg.eigh(cov)
    keep = w > w.max() * 1e-12
    return v[:, keep] * np.sqrt(w[keep])


def _column_pick(p: np.ndarray) -> int:
    colmax = p.max(axis=0)
    return int(np.argmax(colmax))


def scan_direct(pathsets: Sequence[PathSet], bs: BsConfig, resources: Resources, ofdm: OfdmConfig,
                rng: np.random.Generator, pad: int = 4, noise: bool = True,
                rcs_scale: Optional[np.ndarray] = None, t: int = 0) -> RangeAngleMap:
    """Reference scan: full grid simulation, reciprocal filtering and FFT periodogram per direction."""
    dirs = bs.directions
    rows = n_range_bins(ofdm, pad, bs.max_range)
    out = np.zeros((rows, len(dirs)))
    for d, theta in enumerate(dirs):
        ps = pathsets
        if rcs_scale is not None:
            ps = [_scaled(p, rcs_scale[d, i]) for i, p in enumerate(pathsets)]
        x, y = simulate_direction(ps, bs, theta, bs.ue_angle, resources, ofdm, rng, noise)
        per = range_doppler_periodogram(reciprocal_filter(y, x), pad)[:rows]
        out[:, d] = per[:, _column_pick(per)]
    return RangeAngleMap(out, ofdm.range_bin / pad, dirs, bs.index, t)


def _scaled(ps: PathSet, s: float) -> PathSet:
    """Path set with every composite term scaled by ``s`` (per-leg factor sqrt(s))."""
    leg = math.sqrt(s)
    d = replace(ps.direct, gain=ps.direct.gain * s)
    diff = tuple(replace(p, gain=p.gain * leg) for p in ps.diffuse)
    return replace(ps, direct=d, diffuse=diff)


def scan_fast(pathsets: Sequence[PathSet], bs: BsConfig, resources: Resources, ofdm: OfdmConfig,
              rng: np.random.Generator, pad: int = 4, noise: bool = True,
              rcs_scale: Optional[np.ndarray] = None, t: int = 0) -> RangeAngleMap:
    """Same statistics as :func:`scan_direct`, synthesized in the range-Doppler domain.

    The noise-free field is a low-rank sum of separable Dirichlet kernels; the
    noise field is drawn from the exact covariance of the truncated padded
    transform of white noise.
    """
    dirs = bs.directions
    n_dir = len(dirs)
    rows = n_range_bins(ofdm, pad, bs.max_range)
    k_s, m_s = ofdm.k_s, ofdm.m_s
    out = np.zeros((rows, n_dir))

    terms = path_terms(pathsets) if pathsets else None
    if terms is not None:
        live = terms.coef != 0
        for name in ("coef", "delay", "doppler", "rx_angle", "tx_angle", "scatterer"):
            setattr(terms, name, getattr(terms, name)[live])
        if len(terms) == 0:
            terms = None
    if terms is not None:
        # (p, q) and (q, p) share delay and Doppler; fold them onto one kernel
        key = np.stack([terms.scatterer, np.round(terms.delay * 1e15), np.round(terms.doppler * 1e6)], axis=1)
        _, uniq, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
        inv = inv.ravel()
        n = pad * k_s
        bins = np.arange(rows)
        a = _dirichlet(2 * np.pi * (bins[:, None] / n - ofdm.delta_f * terms.delay[uniq][None, :]), k_s)
        a /= math.sqrt(k_s)
        dop = np.arange(m_s)
        b = _dirichlet(2 * np.pi * (ofdm.t_s * terms.doppler[uniq][None, :] - dop[:, None] / m_s), m_s)
        b /= math.sqrt(m_s)
        w_r = rx_combiner(dirs, bs.n_rx)
        w_t = np.stack([tx_beamformer(th, bs.ue_angle, resources.rho_p, bs.eirp, bs.n_tx) for th in dirs])
        gains = term_beam_gains(terms, w_t, w_r) * terms.coef[None, :]
        if rcs_scale is not None:
            gains = gains * rcs_scale[:, terms.scatterer]
        folded = np.zeros((n_dir, len(uniq)), dtype=complex)
        for j in range(len(inv)):
            folded[:, inv[j]] += gains[:, j]
        bt = b.T.copy()
    lfac = _noise_factor(k_s, pad, rows) if noise else None
    sigma = math.sqrt(bs.n_rx * ofdm.noise_variance)
    for d in range(n_dir):
        if terms is not None:
            field = (a * folded[d]) @ bt
        else:
            field = np.zeros((rows, m_s), dtype=complex)
        if noise:
            r = lfac.shape[1]
            z = (rng.standard_normal((r, m_s)) + 1j * rng.standard_normal((r, m_s))) * (sigma / math.sqrt(2))
            field = field + lfac @ z
        p = field.real ** 2 + field.imag ** 2
        out[:, d] = p[:, _column_pick(p)]
    return RangeAngleMap(out, ofdm.range_bin / pad, dirs, bs.index, t)


def swerling_scales(pathsets: Sequence[PathSet], n_dir: int, rng: np.random.Generator) -> np.ndarray:
    """Per-direction amplitude scale sqrt(sigma / sigma_ref) with sigma ~ Exp(mean)."""
    if not pathsets:
        return np.ones((n_dir, 0))
    mean = np.array([p.mean_rcs for p in pathsets])
    ref = np.array([p.rcs for p in pathsets])
    sigma = rng.exponential(1.0, size=(n_dir, len(pathsets))) * mean[None, :]
    return np.sqrt(sigma / ref[None, :])


def scan(scatterers: Sequence[ScattererPose], bs: BsConfig, resources: Resources, ofdm: OfdmConfig,
         env: MultipathEnv, rng: np.random.Generator, pad: int = 4, noise: bool = True,
         swerling: bool = True, method: str = "fast", t: int = 0,
         geometry_key: Optional[tuple] = None) -> RangeAngleMap:
    """Full beam scan of one BS at one epoch.

    Paths are synthesized once per scan at mean RCS; each direction (one block of
    M_s symbols) gets an independent Swerling I draw per scatterer.
    """
    pathsets = paths_for(bs, scatterers, env, rng, ofdm.f_c, mean_rcs=True, geometry_key=geometry_key)
    n_dir = len(bs.directions)
    scales = swerling_scales(pathsets, n_dir, rng) if swerling else None
    if method == "fast":
        return scan_fast(pathsets, bs, resources, ofdm, rng, pad, noise, scales, t)
    if method == "direct":
        return scan_direct(pathsets, bs, resources, ofdm, rng, pad, noise, scales, t)
    raise ValueError(f"unknown scan method {method!r}")
