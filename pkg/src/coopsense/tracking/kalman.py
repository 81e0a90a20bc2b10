"""Vectorized linear Kalman steps over stacks of Gaussian components."""

from __future__ import annotations

import math

import numpy as np

from .models import H, MotionModel


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def kalman_predict(mu: np.ndarray, P: np.ndarray, motion: MotionModel) -> tuple[np.ndarray, np.ndarray]:
    F = motion.F
    mu = np.asarray(mu, dtype=float)
    P = np.asarray(P, dtype=float)
    return mu @ F.T, symmetrize(F @ P @ F.T + motion.Q)


def kalman_gain(mu: np.ndarray, P: np.ndarray, R: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Predicted measurement, innovation covariance and gain for one component."""
    mu = np.asarray(mu, dtype=float)
    P = np.asarray(P, dtype=float)
    z_hat = H @ mu
    S = symmetrize(R + H @ P @ H.T)
    if np.linalg.cond(S) > 1e14:
        raise np.linalg.LinAlgError("innovation covariance is singular")
    K = np.linalg.solve(S, H @ P).T        # P H^T S^-1 with S symmetric
    return z_hat, S, K


def update_pairs(mu: np.ndarray, P: np.ndarray, Z: np.ndarray, R: np.ndarray):
    """Kalman-update every component (n) with every measurement (m).

    Returns log N(z_m; H mu_h, S_hm), squared Mahalanobis distances, updated
    means (n, m, 4) and covariances (n, m, 4, 4).
    """
    n, m = len(mu), len(Z)
    if n == 0 or m == 0:
        return (np.zeros((n, m)), np.zeros((n, m)), np.zeros((n, m, 4)), np.zeros((n, m, 4, 4)))
    HP = P[:, :2, :]                                   # (n, 2, 4)
    S = symmetrize(P[:, None, :2, :2] + R[None, :, :, :])  # (n, m, 2, 2)
    Sinv = np.linalg.inv(S)
    nu = Z[None, :, :] - mu[:, None, :2]               # (n, m, 2)
    K = np.einsum("nij,nmjk->nmik", np.swapaxes(HP, 1, 2), Sinv)   # (n, m, 4, 2)
    mu_u = mu[:, None, :] + np.einsum("nmik,nmk->nmi", K, nu)
    P_u = P[:, None] - np.einsum("nmik,nkj->nmij", K, HP)
    d2 = np.einsum("nmi,nmij,nmj->nm", nu, Sinv, nu)
    _, logdet = np.linalg.slogdet(S)
    logn = -0.5 * d2 - math.log(2 * math.pi) - 0.5 * logdet
    return logn, d2, mu_u, symmetrize(P_u)


def gaussian_logpdf(z: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    d = np.asarray(z, float) - np.asarray(mean, float)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise np.linalg.LinAlgError("covariance is not positive definite")
    return float(-0.5 * d @ np.linalg.solve(cov, d) - 0.5 * len(d) * math.log(2 * math.pi) - 0.5 * logdet)


def moment_match(w: np.ndarray, mu: np.ndarray, P: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Weight-preserving merge of a Gaussian group into one component."""
    w = np.asarray(w, dtype=float)
    W = float(w.sum())
    if W <= 0:
        return W, mu.mean(axis=0), P.mean(axis=0)
    a = w / W
    m = a @ mu
    d = mu - m
    cov = np.einsum("i,ijk->jk", a, P) + np.einsum("i,ij,ik->jk", a, d, d)
    return W, m, symmetrize(cov)
