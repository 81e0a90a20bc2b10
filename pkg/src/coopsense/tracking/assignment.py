"""k-best rectangular assignments (Murty's partitioning) on top of scipy's solver."""

from __future__ import annotations

import heapq
import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment


def _solve(cost: np.ndarray):
    """Row-complete min-cost assignment; None if infeasible."""
    if cost.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    finite = np.isfinite(cost)
    if not finite.any(axis=1).all():
        return None
    big = np.abs(cost[finite]).sum() + 1.0
    c = np.where(finite, cost, big * 4)
    rows, cols = linear_sum_assignment(c)
    if not finite[rows, cols].all():
        return None
    out = np.empty(cost.shape[0], dtype=np.int64)
    out[rows] = cols
    return out, float(cost[rows, cols].sum())


def murty(cost: np.ndarray, k: int) -> list[tuple[np.ndarray, float]]:
    """The ``k`` cheapest assignments of every row to a distinct column.

    ``cost`` is (rows, cols) with rows <= cols; ``inf`` marks forbidden pairs.
    Results are sorted by cost, each as (column per row, total cost).
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] > cost.shape[1]:
        raise ValueError("need a (rows, cols) matrix with rows <= cols")
    if k < 1:
        return []
    first = _solve(cost)
    if first is None:
        return []
    tie = itertools.count()
    heap = [(first[1], next(tie), first[0], cost)]
    out = []
    while heap and len(out) < k:
        c, _, sol, sub = heapq.heappop(heap)
        out.append((sol, c))
        # partition the remaining solution space around ``sol``
        fixed = sub.copy()
        for r in range(cost.shape[0]):
            branch = fixed.copy()
            branch[r, sol[r]] = np.inf
            res = _solve(branch)
            if res is not None:
                heapq.heappush(heap, (res[1], next(tie), res[0], branch))
            # force row r to keep its column in subsequent branches
            keep = fixed[r, sol[r]]
            fixed[r, :] = np.inf
            fixed[:, sol[r]] = np.inf
            fixed[r, sol[r]] = keep
    return out
