"""Detections from the fused map: excision, 1-NN gating to tracks, DBSCAN on the rest."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .fusion import SoftMap, excise

NOISE = -1


@dataclass
class Detection:
    position: np.ndarray
    covariance: np.ndarray
    members: np.ndarray            # (n, 2) integer cell indices
    source: str = "dbscan"         # "track" or "dbscan"
    track: int = -1

    def __post_init__(self):
        if len(self.members) < 1:
            raise ValueError("detection needs at least one member")


def knn_gate(points: np.ndarray, tracks: np.ndarray, xi_nn: float) -> tuple[np.ndarray, np.ndarray]:
    """1-NN gating: label each point with its nearest track index if closer than ``xi_nn``.

    Returns (labels, residual mask); unassigned points get label -1.
    Equidistant tracks resolve to the lowest index.
    """
    if xi_nn <= 0:
        raise ValueError("xi_nn must be positive")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    tracks = np.asarray(tracks, dtype=float).reshape(-1, 2)
    labels = np.full(len(points), -1, dtype=np.int64)
    if len(points) == 0 or len(tracks) == 0:
        return labels, labels < 0
    d2 = ((points[:, None, :] - tracks[None, :, :]) ** 2).sum(-1)
    best = np.argmin(d2, axis=1)              # argmin returns the first minimum
    ok = d2[np.arange(len(points)), best] < xi_nn ** 2
    labels[ok] = best[ok]
    return labels, ~ok


def dbscan(points: np.ndarray, xi_d: float, n_d: int) -> np.ndarray:
    """Density clustering; the eps-neighbourhood is closed and includes the point itself.

    Clusters are numbered in order of their lowest-index core point; a border
    point reachable from several clusters joins the lowest-numbered one.
    Returns labels with -1 for noise.
    """
    if xi_d <= 0 or n_d < 1:
        raise ValueError("need xi_d > 0 and n_d >= 1")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    tree = cKDTree(pts)
    # tiny inflation so that distances equal to xi_d survive float rounding
    r = xi_d * (1 + 1e-12)
    counts = tree.query_ball_point(pts, r, return_length=True)
    core = counts >= n_d
    if not core.any():
        return labels
    core_idx = np.flatnonzero(core)
    ctree = cKDTree(pts[core_idx])
    pairs = ctree.query_pairs(r, output_type="ndarray")
    m = len(core_idx)
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m)) if len(pairs) else \
        coo_matrix((m, m))
    _, comp = connected_components(adj, directed=False)
    # renumber components by first appearance in index order
    order = {}
    for c in comp:
        if c not in order:
            order[c] = len(order)
    core_label = np.array([order[c] for c in comp], dtype=np.int64)
    labels[core_idx] = core_label
    border = np.flatnonzero(~core)
    if len(border):
        near = ctree.query_ball_point(pts[border], r)
        for b, nb in zip(border, near):
            if nb:
                labels[b] = core_label[nb].min()
    return labels


def dbscan_reference(points: np.ndarray, xi_d: float, n_d: int) -> np.ndarray:
    """Breadth-first textbook DBSCAN; quadratic, for small inputs and cross-checks."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    nbr = d <= xi_d * (1 + 1e-12)
    core = nbr.sum(1) >= n_d
    labels = np.full(n, NOISE, dtype=np.int64)
    k = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = k
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for q in np.flatnonzero(nbr[j]):
                if labels[q] == NOISE:
                    labels[q] = k
                    if core[q]:
                        queue.append(q)
        k += 1
    return labels


def floor_covariance(dx: float, dy: float) -> np.ndarray:
    return np.diag([dx * dx / 12.0, dy * dy / 12.0])


def centroid(xy: np.ndarray, weights: Optional[np.ndarray] = None,
             floor: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Cluster centroid and (N-1)-normalized sample covariance, eigenvalues clipped at ``floor``."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if len(xy) == 0:
        raise ValueError("empty cluster")
    if weights is None:
        z = xy.mean(axis=0)
    else:
        w = np.asarray(weights, dtype=float)
        z = (w[:, None] * xy).sum(0) / w.sum()
    if len(xy) > 1:
        e = xy - z
        cov = e.T @ e / (len(xy) - 1)
    else:
        cov = np.zeros((2, 2))
    cov = 0.5 * (cov + cov.T)
    if floor is not None:
        # clip the spectrum from below so the covariance is never singular
        vals, vecs = np.linalg.eigh(cov)
        fl = float(np.min(np.diag(floor)))
        if len(xy) == 1:
            cov = np.array(floor, dtype=float)
        elif vals.min() < fl:
            cov = (vecs * np.maximum(vals, fl)) @ vecs.T
            cov = 0.5 * (cov + cov.T)
    return z, cov


@dataclass
class ClusterResult:
    detections: list[Detection]
    points: np.ndarray                 # post-gamma_d cells, sorted by (ix, iy)
    assignment: np.ndarray             # per point: "track", "dbscan" or "noise"
    owner: np.ndarray                  # track index or dbscan label, -1 for noise


@dataclass(frozen=True)
class ClusterParams:
    gamma_d: float = 2e-7
    xi_nn: float = 5.0
    xi_d: float = 3.0
    n_d: int = 50
    weighted: bool = False


def extract_detections(soft: SoftMap, tracks: Sequence, params: ClusterParams = ClusterParams()) -> ClusterResult:
    """Excise at gamma_d, gate points to prior track positions, DBSCAN the residual points."""
    m = excise(soft, params.gamma_d)
    ix, iy, val = m.points()
    cells = np.stack([ix, iy], axis=1) if len(ix) else np.zeros((0, 2), dtype=np.int64)
    xy = m.grid.centers(ix, iy).reshape(-1, 2)
    floor = floor_covariance(m.grid.dx, m.grid.dy)
    tracks = np.asarray(tracks, dtype=float).reshape(-1, 2)
    labels, residual = knn_gate(xy, tracks, params.xi_nn)
    kind = np.full(len(xy), "noise", dtype=object)
    owner = np.full(len(xy), -1, dtype=np.int64)
    dets = []
    for k in range(len(tracks)):
        sel = np.flatnonzero(labels == k)
        if len(sel) == 0:
            continue
        z, cov = centroid(xy[sel], val[sel] if params.weighted else None, floor)
        dets.append(Detection(z, cov, cells[sel], "track", k))
        kind[sel] = "track"
        owner[sel] = k
    res_idx = np.flatnonzero(residual)
    db = dbscan(xy[res_idx], params.xi_d, params.n_d)
    for c in range(db.max() + 1 if len(db) else 0):
        sel = res_idx[db == c]
        z, cov = centroid(xy[sel], val[sel] if params.weighted else None, floor)
        dets.append(Detection(z, cov, cells[sel], "dbscan", -1))
        kind[sel] = "dbscan"
        owner[sel] = c
    return ClusterResult(dets, cells, kind, owner)
