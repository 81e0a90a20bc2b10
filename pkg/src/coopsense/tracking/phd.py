"""Gaussian-mixture PHD filter."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kalman import kalman_predict, moment_match, update_pairs
from .models import BirthModel, MeasurementModel, MotionModel


@dataclass
class GaussianMixture:
    w: np.ndarray
    mu: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float).reshape(-1)
        self.mu = np.asarray(self.mu, dtype=float).reshape(-1, 4)
        self.P = np.asarray(self.P, dtype=float).reshape(-1, 4, 4)
        if not (len(self.w) == len(self.mu) == len(self.P)):
            raise ValueError("mixture arrays differ in length")

    @classmethod
    def empty(cls) -> "GaussianMixture":
        return cls(np.zeros(0), np.zeros((0, 4)), np.zeros((0, 4, 4)))

    def __len__(self):
        return len(self.w)

    def take(self, idx) -> "GaussianMixture":
        return GaussianMixture(self.w[idx], self.mu[idx], self.P[idx])

    def concat(self, other: "GaussianMixture") -> "GaussianMixture":
        return GaussianMixture(np.concatenate([self.w, other.w]), np.concatenate([self.mu, other.mu]),
                               np.concatenate([self.P, other.P]))


@dataclass(frozen=True)
class PhdParams:
    gamma_p: float = 1e-4
    gamma_q: int = 10
    gamma_v: float = 5.0


def phd_predict(gm: GaussianMixture, motion: MotionModel) -> GaussianMixture:
    mu, P = kalman_predict(gm.mu, gm.P, motion)
    return GaussianMixture(motion.p_s * gm.w, mu, P)


def add_births(gm: GaussianMixture, births: BirthModel) -> GaussianMixture:
    return gm.concat(GaussianMixture(*births.arrays()))


def phd_update(gm: GaussianMixture, Z: np.ndarray, R: np.ndarray, meas: MeasurementModel) -> GaussianMixture:
    """Posterior intensity: missed-detection copies followed by one block per measurement."""
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    R = np.asarray(R, dtype=float).reshape(-1, 2, 2)
    n, m = len(gm), len(Z)
    out_w = [(1.0 - meas.p_d) * gm.w]
    out_mu = [gm.mu]
    out_P = [gm.P]
    if n and m:
        logn, _, mu_u, P_u = update_pairs(gm.mu, gm.P, Z, R)
        wt = meas.p_d * gm.w[:, None] * np.exp(logn)          # (n, m)
        wt = wt / (meas.lambda_c + wt.sum(axis=0, keepdims=True))
        for j in range(m):
            out_w.append(wt[:, j])
            out_mu.append(mu_u[:, j])
            out_P.append(P_u[:, j])
    return GaussianMixture(np.concatenate(out_w), np.concatenate(out_mu), np.concatenate(out_P))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def phd_estimate(gm: GaussianMixture) -> np.ndarray:
    """Means of the round(sum w) highest-weight components (stable order on ties)."""
    if len(gm) == 0:
        return np.zeros((0, 4))
    n = min(round_half_up(float(gm.w.sum())), len(gm))
    if n <= 0:
        return np.zeros((0, 4))
    order = np.argsort(-gm.w, kind="stable")[:n]
    return gm.mu[order]


def prune(gm: GaussianMixture, gamma_p: float) -> GaussianMixture:
    return gm.take(np.flatnonzero(gm.w >= gamma_p))


def cap(gm: GaussianMixture, gamma_q: int) -> GaussianMixture:
    if len(gm) <= gamma_q:
        return gm
    order = np.argsort(-gm.w, kind="stable")[:gamma_q]
    return gm.take(np.sort(order))


def merge(gm: GaussianMixture, gamma_v: float) -> GaussianMixture:
    """Greedy merge around the heaviest remaining component (Euclidean mean distance < gamma_v)."""
    remaining = np.ones(len(gm), dtype=bool)
    w_out, mu_out, P_out = [], [], []
    order = np.argsort(-gm.w, kind="stable")
    for i in order:
        if not remaining[i]:
            continue
        d = np.linalg.norm(gm.mu - gm.mu[i], axis=1)
        group = np.flatnonzero(remaining & (d < gamma_v))
        W, m, P = moment_match(gm.w[group], gm.mu[group], gm.P[group])
        w_out.append(W)
        mu_out.append(m)
        P_out.append(P)
        remaining[group] = False
    if not w_out:
        return GaussianMixture.empty()
    return GaussianMixture(np.array(w_out), np.array(mu_out), np.array(P_out))


def gm_reduce(gm: GaussianMixture, gamma_p: float, gamma_q: int, gamma_v: float) -> GaussianMixture:
    return merge(cap(prune(gm, gamma_p), gamma_q), gamma_v)


@dataclass
class PhdFilter:
    motion: MotionModel
    meas: MeasurementModel
    births: BirthModel
    params: PhdParams = field(default_factory=PhdParams)
    state: GaussianMixture = field(default_factory=GaussianMixture.empty)

    def step(self, Z: np.ndarray, R: np.ndarray) -> np.ndarray:
        """One predict/update/reduce cycle; returns the estimated states."""
        gm = add_births(phd_predict(self.state, self.motion), self.births)
        gm = phd_update(gm, Z, R, self.meas)
        p = self.params
        self.state = gm_reduce(gm, p.gamma_p, p.gamma_q, p.gamma_v)
        return phd_estimate(self.state)
