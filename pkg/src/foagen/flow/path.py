"""Linear interpolation path between noise and data, and time samplers.

The path runs from pure noise at t = 0 to data at t = 1:

    x_t = t * x1 + (1 - t) * x0

so the regression target for the velocity field is the constant
displacement u = x1 - x0 along each path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch


def as_latent(x, name: str = "latent") -> np.ndarray:
    """Validate a (frames, dims) latent sequence and return it as float64."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D (frames, dims) array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_pair(x0, x1) -> tuple[np.ndarray, np.ndarray]:
    a = as_latent(x0, "x0")
    b = as_latent(x1, "x1")
    if a.shape != b.shape:
        raise ShapeMismatch(f"x0 and x1 shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _check_time(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t!r}")
    return t


def interpolate(x0, x1, t: float) -> np.ndarray:
    """Point on the noise-to-data path at time t."""
    a, b = _check_pair(x0, x1)
    t = _check_time(t)
    return t * b + (1.0 - t) * a


def velocity_target(x0, x1) -> np.ndarray:
    """Regression target for the velocity field: x1 - x0."""
    a, b = _check_pair(x0, x1)
    return b - a


@dataclass(frozen=True)
class FlowSample:
    """One training draw: endpoints, time, path point, and target."""

    x0: np.ndarray
    x1: np.ndarray
    t: float
    xt: np.ndarray
    u: np.ndarray

    @classmethod
    def draw(cls, x0, x1, t: float) -> "FlowSample":
        a, b = _check_pair(x0, x1)
        t = _check_time(t)
        return cls(x0=a, x1=b, t=t, xt=t * b + (1.0 - t) * a, u=b - a)


@dataclass(frozen=True)
class TimeSampler:
    """Law for drawing path times: uniform on [0, 1] or logit-normal.

    The logit-normal law pushes a Normal(mu, sigma) draw through the
    logistic sigmoid, concentrating mass at mid-path times.
    """

    kind: str = "uniform"
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "logit_normal"):
            raise ValueError(f"unknown time sampler kind {self.kind!r}")
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError("sigma must be positive and finite")


def sample_time(sampler: TimeSampler, rng: np.random.Generator) -> float:
    """Draw one path time according to the sampler's law."""
    if sampler.kind == "uniform":
        return float(rng.random())
    z = rng.normal(sampler.mu, sampler.sigma)
    t = 1.0 / (1.0 + math.exp(-z))
    # Guard against rounding to the closed endpoints for extreme draws.
    return min(max(t, math.ulp(0.0)), 1.0 - math.ulp(1.0) / 2)
