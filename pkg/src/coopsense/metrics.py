"""OSPA with detection statistics, downlink sum rate and time-series summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channel import OfdmConfig, round_half_up

QPSK_A = (0.143281, 0.856719)
QPSK_B = (1.557531, 0.57239)


@dataclass(frozen=True)
class OspaResult:
    ospa: float
    localization: float
    cardinality: float
    p_d: float
    p_fa: float
    p_md: float
    assignment: tuple = ()

    @property
    def defined(self) -> bool:
        """False when the truth set is empty and the probabilities are undefined (NaN)."""
        return not math.isnan(self.p_d)


def _pairwise(truth: np.ndarray, est: np.ndarray) -> np.ndarray:
    return np.sqrt(((truth[:, None, :] - est[None, :, :]) ** 2).sum(-1))


def ospa(truth, estimates, p: float = 2.0, xi_g: float = 5.0) -> OspaResult:
    """Cutoff OSPA normalized by N_c = |S| + |S^| - |zeta*| (in-gate pairs only count as matches)."""
    if p < 1 or xi_g <= 0:
        raise ValueError("need p >= 1 and xi_g > 0")
    S = np.asarray(truth, dtype=float).reshape(-1, 2)
    E = np.asarray(estimates, dtype=float).reshape(-1, 2)
    ns, ne = len(S), len(E)
    pairs: tuple = ()
    loc_sum = 0.0
    if ns and ne:
        d = _pairwise(S, E)
        cost = np.minimum(d, xi_g) ** p
        rows, cols = linear_sum_assignment(cost)
        gate = d[rows, cols] < xi_g
        pairs = tuple((int(i), int(j)) for i, j in zip(rows[gate], cols[gate]))
        loc_sum = float((d[rows[gate], cols[gate]] ** p).sum())
    n_match = len(pairs)
    n_c = ns + ne - n_match
    if n_c == 0:
        res_p = (float("nan"),) * 3
        return OspaResult(0.0, 0.0, 0.0, *res_p, pairs)
    card_sum = xi_g ** p / 2.0 * (ns + ne - 2 * n_match)
    total = ((loc_sum + card_sum) / n_c) ** (1.0 / p)
    loc = (loc_sum / n_c) ** (1.0 / p)
    card = (card_sum / n_c) ** (1.0 / p)
    if ns == 0:
        p_d = p_fa = p_md = float("nan")
    else:
        p_d = n_match / ns
        p_fa = (ne - n_match) / ns
        p_md = 1.0 - p_d
    return OspaResult(total, loc, card, p_d, p_fa, p_md, pairs)


def qpsk_capacity(gamma):
    """Bits per symbol of QPSK at linear SNR ``gamma`` (two-exponential fit)."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("snr must be nonnegative")
    out = 2.0 * (1.0 - QPSK_A[0] * np.exp(-QPSK_B[0] * g) - QPSK_A[1] * np.exp(-QPSK_B[1] * g))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RateReport:
    jsc: float
    comm_subcarriers: float
    comm_time: float

    @property
    def c_dl(self) -> float:
        return self.jsc + self.comm_subcarriers + self.comm_time


def downlink_sum_rate(rho_f: float, rho_t: float, rho_p: float, snr_c, ofdm: OfdmConfig = OfdmConfig()) -> RateReport:
    """Downlink sum rate of one BS; ``snr_c`` is linear, scalar or one value per subcarrier."""
    for name, v in (("rho_f", rho_f), ("rho_t", rho_t), ("rho_p", rho_p)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    k0 = ofdm.k0
    snr = np.broadcast_to(np.asarray(snr_c, dtype=float), (k0,))
    k_jsc = min(k0, round_half_up(rho_f * k0))
    shannon = np.log2(1.0 + snr)
    t1 = rho_t * ofdm.delta_f * float(np.sum(qpsk_capacity((1.0 - rho_p) * snr[:k_jsc])))
    t2 = rho_t * ofdm.delta_f * float(shannon[k_jsc:].sum())
    t3 = (1.0 - rho_t) * ofdm.delta_f * float(shannon.sum())
    return RateReport(t1, t2, t3)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def percentile_summary(values, burn_in: int = 0, q=(10, 90)) -> dict:
    """Mean and percentiles of a (runs, scans) array after dropping the first ``burn_in`` scans."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[None, :]
    v = v[:, burn_in:].ravel()
    v = v[~np.isnan(v)]
    out = {"mean": float(v.mean()) if v.size else float("nan")}
    for qq in q:
        out[f"p{qq:g}"] = float(np.percentile(v, qq)) if v.size else float("nan")
    return out
