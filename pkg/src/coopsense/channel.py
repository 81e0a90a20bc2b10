"""Monostatic multipath channel: per-scatterer path sets and the beamformed response.

Each scatterer contributes ``L_p`` one-way legs (the direct leg plus ``L_p - 1``
diffuse legs). The round-trip channel is the double sum over leg pairs
``(p, q)``: receive on leg ``p``, transmit on leg ``q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .scenario import BsConfig, ScattererPose, is_visible, wrap_angle

C = 299_792_458.0


@dataclass(frozen=True)
class OfdmConfig:
    f_c: float = 28e9
    delta_f: float = 120e3
    k0: int = 3168
    k_s: int = 3168
    m_s: int = 112
    t_s: Optional[float] = None
    n0: float = 4e-20

    def __post_init__(self):
        if not 1 <= self.k_s <= self.k0:
            raise ValueError(f"need 1 <= k_s <= k0, got k_s={self.k_s}, k0={self.k0}")
        if self.m_s < 1:
            raise ValueError("m_s must be >= 1")
        if self.t_s is None:
            object.__setattr__(self, "t_s", 1.0 / self.delta_f)
        if self.t_s < 1.0 / self.delta_f * (1 - 1e-12):
            raise ValueError("symbol duration shorter than 1/delta_f")

    @classmethod
    def with_fraction(cls, rho_f: float, **kw) -> "OfdmConfig":
        k0 = kw.get("k0", cls.k0)
        return cls(k_s=sensing_subcarriers(rho_f, k0), **kw)

    @property
    def noise_variance(self) -> float:
        """Per-antenna noise variance after OFDM demodulation."""
        return self.n0 * self.delta_f

    @property
    def range_bin(self) -> float:
        return C / (2.0 * self.k_s * self.delta_f)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def sensing_subcarriers(rho_f: float, k0: int) -> int:
    return max(1, min(k0, round_half_up(rho_f * k0)))


@dataclass(frozen=True)
class MultipathEnv:
    """Stand-in for a stochastic urban channel generator."""

    n_paths: int = 6
    k_factor_db: float = 10.0
    delay_spread: float = 50e-9
    angle_spread: float = math.radians(10.0)
    doppler_jitter: float = 10.0
    persistent: bool = True

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")


NO_MULTIPATH = MultipathEnv(n_paths=1)


@dataclass(frozen=True)
class Path:
    gain: float
    phase: float
    delay: float
    doppler: float
    bs_angle: float
    target_angle: float

    def __post_init__(self):
        if self.gain < 0 or self.delay < 0:
            raise ValueError("path gain and delay must be nonnegative")


@dataclass(frozen=True)
class PathSet:
    """Paths for one scatterer seen from one BS.

    ``direct`` holds round-trip quantities (gain alpha, delay 2d/c, Doppler
    2 f_c v_r / c); ``diffuse`` holds one-way legs.
    """

    scatterer: int
    direct: Path
    diffuse: tuple[Path, ...] = ()
    visibility: object = None
    mean_rcs: float = 1.0
    rcs: float = 1.0

    @property
    def direct_leg(self) -> Path:
        d = self.direct
        return Path(math.sqrt(d.gain), d.phase / 2, d.delay / 2, d.doppler / 2, d.bs_angle, d.target_angle)

    @property
    def legs(self) -> list[Path]:
        return [self.direct_leg, *self.diffuse]


def radar_amplitude(d: float, sigma: float, f_c: float) -> float:
    """Round-trip amplitude from the radar equation."""
    if d <= 0:
        raise ValueError("distance must be positive")
    if sigma < 0:
        raise ValueError("rcs must be nonnegative")
    return math.sqrt(C ** 2 * sigma / ((4 * math.pi) ** 3 * f_c ** 2 * d ** 4))


def draw_rcs(mean_rcs, rng: np.random.Generator, size=None):
    """Swerling I draw: exponential with the given mean."""
    mean_rcs = np.asarray(mean_rcs, dtype=float)
    if np.any(mean_rcs <= 0):
        raise ValueError("mean rcs must be positive")
    return rng.exponential(mean_rcs, size=size)


def synth_paths(bs: BsConfig, pose: ScattererPose, env: MultipathEnv, rng: np.random.Generator,
                f_c: float = 28e9, rcs: Optional[float] = None, scatterer: int = 0,
                geometry: Optional[np.random.Generator] = None) -> PathSet:
    """Direct path plus ``env.n_paths - 1`` diffuse legs for one scatterer.

    Phases always come from ``rng``. Excess delays, angles, Doppler jitter and
    power shares come from ``geometry`` when given, so a caller can keep the
    diffuse geometry fixed across scans.
    """
    g = rng if geometry is None else geometry
    rel = pose.position - np.asarray(bs.position)
    d = float(np.hypot(*rel))
    if d > bs.max_range:
        raise ValueError(f"scatterer at {d:.1f} m beyond max range {bs.max_range} m")
    if rcs is None:
        rcs = float(draw_rcs(pose.mean_rcs, rng))
    u = rel / d
    closing = -float(pose.velocity @ u)
    theta = bs.local_angle(pose.position)
    psi = wrap_angle(math.atan2(-rel[1], -rel[0]))
    alpha = radar_amplitude(d, rcs, f_c)
    fd = 2.0 * f_c * closing / C
    direct = Path(alpha, float(rng.uniform(0, 2 * math.pi)), 2 * d / C, fd, theta, psi)
    diffuse = []
    n_diff = env.n_paths - 1
    if n_diff > 0:
        excess = g.exponential(env.delay_spread, n_diff)
        offsets = g.uniform(-env.angle_spread, env.angle_spread, n_diff)
        psi_d = g.uniform(-math.pi, math.pi, n_diff)
        jitter = g.uniform(-env.doppler_jitter, env.doppler_jitter, n_diff)
        phases = rng.uniform(0, 2 * math.pi, n_diff)
        pdp = np.exp(-excess / env.delay_spread)
        k_lin = 10 ** (env.k_factor_db / 10)
        # one-way diffuse power relative to the direct leg power alpha
        powers = alpha / k_lin * pdp / pdp.sum()
        for i in range(n_diff):
            diffuse.append(Path(
                gain=float(np.sqrt(powers[i])),
                phase=float(phases[i]),
                delay=d / C + float(excess[i]),
                doppler=fd / 2 + float(jitter[i]),
                bs_angle=wrap_angle(theta + float(offsets[i])),
                target_angle=wrap_angle(float(psi_d[i])),
            ))
    return PathSet(scatterer, direct, tuple(diffuse), pose.visibility, pose.mean_rcs, rcs)


@dataclass
class PathTerms:
    """Flattened (p, q) leg-pair terms for a list of path sets."""

    coef: np.ndarray
    delay: np.ndarray
    doppler: np.ndarray
    rx_angle: np.ndarray
    tx_angle: np.ndarray
    scatterer: np.ndarray
    pair: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))

    def __len__(self):
        return len(self.coef)


def path_terms(pathsets: Sequence[PathSet]) -> PathTerms:
    """Enumerate every leg pair; invisible legs get zero coefficient."""
    coef, delay, dop, rx, tx, sc, pair = [], [], [], [], [], [], []
    for i, ps in enumerate(pathsets):
        legs = ps.legs
        nu = [1.0 if ps.visibility is None or is_visible(ps.visibility, leg.target_angle) else 0.0
              for leg in legs]
        for p, lp in enumerate(legs):
            for q, lq in enumerate(legs):
                if p == 0 and q == 0:
                    d = ps.direct
                    coef.append(nu[0] * d.gain * np.exp(1j * d.phase))
                    delay.append(d.delay)
                    dop.append(d.doppler)
                else:
                    coef.append(nu[p] * nu[q] * lp.gain * lq.gain * np.exp(1j * (lp.phase + lq.phase)))
                    delay.append(lp.delay + lq.delay)
                    dop.append(lp.doppler + lq.doppler)
                rx.append(lp.bs_angle)
                tx.append(lq.bs_angle)
                sc.append(i)
                pair.append((p, q))
    return PathTerms(np.array(coef, dtype=complex), np.array(delay, dtype=float), np.array(dop, dtype=float),
                     np.array(rx, dtype=float), np.array(tx, dtype=float), np.array(sc, dtype=int),
                     np.array(pair, dtype=int).reshape(-1, 2))


def steering_vector(theta, n: int) -> np.ndarray:
    """Half-wavelength ULA response; vectorizes over ``theta`` (last axis = elements)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    theta = np.asarray(theta, dtype=float)
    j = np.arange(n)
    return np.exp(1j * np.pi * np.multiply.outer(np.sin(theta), j))


def term_beam_gains(terms: PathTerms, w_t: np.ndarray, w_r: np.ndarray) -> np.ndarray:
    """w_R^T a_R(theta_p) * a_T^T(theta_q) w_T for each term; w may be stacked (D, N)."""
    w_t = np.atleast_2d(w_t)
    w_r = np.atleast_2d(w_r)
    ar = steering_vector(terms.rx_angle, w_r.shape[-1])
    at = steering_vector(terms.tx_angle, w_t.shape[-1])
    g = (w_r @ ar.T) * (w_t @ at.T)
    return g


def response_grid(pathsets: Sequence[PathSet], w_t: np.ndarray, w_r: np.ndarray, ofdm: OfdmConfig,
                  k=None, m=None) -> np.ndarray:
    """Noise-free y/x = w_R^T H[k, m] w_T on the (k, m) grid."""
    k = np.arange(ofdm.k_s) if k is None else np.atleast_1d(k)
    m = np.arange(ofdm.m_s) if m is None else np.atleast_1d(m)
    if not pathsets:
        return np.zeros((len(k), len(m)), dtype=complex)
    terms = path_terms(pathsets)
    c = terms.coef * term_beam_gains(terms, w_t, w_r)[0]
    u = np.exp(-2j * np.pi * ofdm.delta_f * np.multiply.outer(k, terms.delay))
    v = np.exp(2j * np.pi * ofdm.t_s * np.multiply.outer(m, terms.doppler))
    return (u * c) @ v.T


def beamformed_response(pathsets: Sequence[PathSet], w_t: np.ndarray, w_r: np.ndarray,
                        ofdm: OfdmConfig, k: int, m: int) -> complex:
    if not 0 <= k < ofdm.k_s or not 0 <= m < ofdm.m_s:
        raise IndexError("subcarrier/symbol index out of range")
    return complex(response_grid(pathsets, w_t, w_r, ofdm, k, m)[0, 0])
