"""Motion, measurement and birth models shared by both trackers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

H = np.array([[1.0, 0.0, 0.0, 0.0],
              [0.0, 1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class MotionModel:
    """Constant-velocity model with Q = alpha_q * dt * I4."""

    dt: float = 0.05
    alpha_q: float = 5.0
    p_s: float = 0.9

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.p_s <= 1.0:
            raise ValueError("p_s must lie in [0, 1]")

    @property
    def F(self) -> np.ndarray:
        f = np.eye(4)
        f[0, 2] = f[1, 3] = self.dt
        return f

    @property
    def Q(self) -> np.ndarray:
        return self.alpha_q * self.dt * np.eye(4)


@dataclass(frozen=True)
class MeasurementModel:
    p_d: float = 0.99
    lambda_c: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError("p_d must lie in [0, 1]")
        if self.lambda_c <= 0:
            raise ValueError("lambda_c must be positive")

    @property
    def H(self) -> np.ndarray:
        return H


@dataclass(frozen=True)
class BirthComponent:
    weight: float                   # PHD weight or MBM existence probability
    mean: tuple
    cov: float | tuple = 0.1        # scalar variance (times I4) or full 4x4 nested tuple

    def mean_array(self) -> np.ndarray:
        m = np.zeros(4)
        mean = np.asarray(self.mean, dtype=float).ravel()
        m[: len(mean)] = mean
        return m

    def cov_array(self) -> np.ndarray:
        c = np.asarray(self.cov, dtype=float)
        return c * np.eye(4) if c.ndim == 0 else c.reshape(4, 4)


@dataclass(frozen=True)
class BirthModel:
    """Lane/crosswalk components plus one wide recovery component."""

    lanes: tuple[BirthComponent, ...] = ()
    recovery: BirthComponent | None = None

    @property
    def components(self) -> list[BirthComponent]:
        return list(self.lanes) + ([self.recovery] if self.recovery is not None else [])

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        comps = self.components
        w = np.array([c.weight for c in comps], dtype=float)
        mu = np.array([c.mean_array() for c in comps]).reshape(-1, 4)
        P = np.array([c.cov_array() for c in comps]).reshape(-1, 4, 4)
        return w, mu, P

    @classmethod
    def phd(cls, positions: Sequence, recovery_at=(0.0, 0.0)) -> "BirthModel":
        lanes = tuple(BirthComponent(0.1, tuple(p), 0.1) for p in positions)
        rec = None if recovery_at is None else BirthComponent(0.01, tuple(recovery_at), 5.0)
        return cls(lanes, rec)

    @classmethod
    def mbm(cls, positions: Sequence, recovery_at=(0.0, 0.0)) -> "BirthModel":
        lanes = tuple(BirthComponent(1e-4, tuple(p), 0.1) for p in positions)
        rec = None if recovery_at is None else BirthComponent(1e-5, tuple(recovery_at), 5.0)
        return cls(lanes, rec)
