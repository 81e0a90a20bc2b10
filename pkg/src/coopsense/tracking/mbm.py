"""Multi-Bernoulli mixture filter with log-domain hypothesis weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assignment import murty
from .kalman import kalman_predict, moment_match, update_pairs
from .models import BirthModel, MeasurementModel, MotionModel


@dataclass
class Hypothesis:
    """Global hypothesis: log-weight plus a multi-Bernoulli (r, mu, P) stack."""

    log_w: float
    r: np.ndarray
    mu: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(-1)
        self.mu = np.asarray(self.mu, dtype=float).reshape(-1, 4)
        self.P = np.asarray(self.P, dtype=float).reshape(-1, 4, 4)
        if np.any((self.r < 0) | (self.r > 1)):
            raise ValueError("existence probabilities must lie in [0, 1]")

    def __len__(self):
        return len(self.r)

    def take(self, idx) -> "Hypothesis":
        return Hypothesis(self.log_w, self.r[idx], self.mu[idx], self.P[idx])


@dataclass(frozen=True)
class MbmParams:
    xi_a: float = 14.0
    gamma_e: float = 0.99
    gamma_g: float = 1e-15
    gamma_l: float = 1e-4
    gamma_c: int = 10
    gamma_m: float = 5.0


def missed_existence(r, p_d):
    """r (1 - P_d) / (1 - r + r (1 - P_d))."""
    r = np.asarray(r, dtype=float)
    return r * (1.0 - p_d) / (1.0 - r + r * (1.0 - p_d))


def mbm_predict(hyps: list[Hypothesis], motion: MotionModel) -> list[Hypothesis]:
    out = []
    for h in hyps:
        mu, P = kalman_predict(h.mu, h.P, motion)
        out.append(Hypothesis(h.log_w, motion.p_s * h.r, mu, P))
    return out


def add_births(hyps: list[Hypothesis], births: BirthModel) -> list[Hypothesis]:
    r_b, mu_b, P_b = births.arrays()
    if not hyps:
        hyps = [Hypothesis(0.0, np.zeros(0), np.zeros((0, 4)), np.zeros((0, 4, 4)))]
    return [Hypothesis(h.log_w, np.concatenate([h.r, r_b]), np.concatenate([h.mu, mu_b]),
                       np.concatenate([h.P, P_b])) for h in hyps]


def association_costs(h: Hypothesis, Z: np.ndarray, R: np.ndarray, meas: MeasurementModel, xi_a: float):
    """Cost matrix (M, n + M) for one hypothesis and the quantities needed to apply an assignment.

    Entry (m, j < n) is -log[r_j P_d N(z_m) / (lambda_c (1 - r_j P_d))]; the
    block (m, n + m) is the clutter option at zero cost.
    """
    n, M = len(h), len(Z)
    logn, d2, mu_u, P_u = update_pairs(h.mu, h.P, Z, R)
    with np.errstate(divide="ignore"):
        lm = np.log1p(-h.r * meas.p_d) if n else np.zeros(0)
        ld = np.log(h.r * meas.p_d)[:, None] + logn - math.log(meas.lambda_c)
    cost = np.full((M, n + M), np.inf)
    if n:
        det = -(ld - lm[:, None]).T
        det[(d2.T > xi_a) | ~np.isfinite(det)] = np.inf
        cost[:, :n] = det
    cost[np.arange(M), n + np.arange(M)] = 0.0
    return cost, lm, mu_u, P_u


def mbm_update(hyps: list[Hypothesis], Z: np.ndarray, R: np.ndarray, meas: MeasurementModel,
               params: MbmParams = MbmParams(), k_best: int | None = None) -> list[Hypothesis]:
    """Expand every hypothesis by its k best data associations (unnormalized log-weights)."""
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    R = np.asarray(R, dtype=float).reshape(-1, 2, 2)
    M = len(Z)
    k = params.gamma_c if k_best is None else k_best
    out = []
    for h in hyps:
        n = len(h)
        r_miss = missed_existence(h.r, meas.p_d) if n else h.r
        if M == 0:
            lm = np.log1p(-h.r * meas.p_d) if n else np.zeros(0)
            out.append(Hypothesis(h.log_w + float(lm.sum()), r_miss, h.mu, h.P))
            continue
        cost, lm, mu_u, P_u = association_costs(h, Z, R, meas, params.xi_a)
        base = h.log_w + float(lm.sum()) + M * math.log(meas.lambda_c)
        for cols, c in murty(cost, k):
            r = r_miss.copy()
            mu = h.mu.copy()
            P = h.P.copy()
            for m_idx, j in enumerate(cols):
                if j < n:
                    r[j] = 1.0
                    mu[j] = mu_u[j, m_idx]
                    P[j] = P_u[j, m_idx]
            out.append(Hypothesis(base - c, r, mu, P))
    return out


def mbm_normalize(hyps: list[Hypothesis]) -> list[Hypothesis]:
    if not hyps:
        raise ValueError("cannot normalize an empty hypothesis set")
    lw = np.array([h.log_w for h in hyps])
    i_star = int(np.argmax(lw))
    rel = lw - lw[i_star]
    others = np.exp(rel)
    others[i_star] = 0.0
    norm = rel - math.log1p(others.sum())
    return [Hypothesis(float(l), h.r, h.mu, h.P) for l, h in zip(norm, hyps)]


def mbm_estimate(hyps: list[Hypothesis], gamma_e: float) -> np.ndarray:
    if not hyps:
        return np.zeros((0, 4))
    best = hyps[int(np.argmax([h.log_w for h in hyps]))]
    return best.mu[best.r >= gamma_e]


def merge_bernoullis(h: Hypothesis, gamma_m: float) -> Hypothesis:
    """Greedy moment-matching merge of Bernoullis with means closer than ``gamma_m``.

    Existence probabilities act as merge weights; the merged existence is
    their sum clipped to 1.
    """
    remaining = np.ones(len(h), dtype=bool)
    r_out, mu_out, P_out = [], [], []
    for i in np.argsort(-h.r, kind="stable"):
        if not remaining[i]:
            continue
        d = np.linalg.norm(h.mu - h.mu[i], axis=1)
        group = np.flatnonzero(remaining & (d < gamma_m))
        W, m, P = moment_match(h.r[group], h.mu[group], h.P[group])
        r_out.append(min(1.0, W))
        mu_out.append(m)
        P_out.append(P)
        remaining[group] = False
    return Hypothesis(h.log_w, np.array(r_out), np.array(mu_out).reshape(-1, 4),
                      np.array(P_out).reshape(-1, 4, 4))


def mbm_reduce(hyps: list[Hypothesis], gamma_g: float, gamma_l: float, gamma_c: int,
               gamma_m: float) -> list[Hypothesis]:
    """Prune hypotheses and Bernoullis, cap, merge inside the best hypothesis, renormalize."""
    hyps = mbm_normalize(hyps)
    kept = [h for h in hyps if math.exp(h.log_w) >= gamma_g]
    if not kept:
        kept = [max(hyps, key=lambda h: h.log_w)]
    kept = [h.take(np.flatnonzero(h.r >= gamma_l)) for h in kept]
    order = np.argsort([-h.log_w for h in kept], kind="stable")[:gamma_c]
    kept = [kept[i] for i in order]
    kept[0] = merge_bernoullis(kept[0], gamma_m)
    return mbm_normalize(kept)


@dataclass
class MbmFilter:
    motion: MotionModel
    meas: MeasurementModel
    births: BirthModel
    params: MbmParams = field(default_factory=MbmParams)
    state: list = field(default_factory=list)

    def step(self, Z: np.ndarray, R: np.ndarray) -> np.ndarray:
        hyps = add_births(mbm_predict(self.state, self.motion), self.births)
        hyps = mbm_update(hyps, Z, R, self.meas, self.params)
        p = self.params
        self.state = mbm_reduce(hyps, p.gamma_g, p.gamma_l, p.gamma_c, p.gamma_m)
        return mbm_estimate(self.state, p.gamma_e)
