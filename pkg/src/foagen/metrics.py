"""Evaluation metrics for spatial audio: angular errors, distribution
distances, and a multi-resolution spectrogram distance.

Angle arguments are radians. Azimuth errors are circular (wrap at 2*pi);
elevation errors are plain absolute differences on [-pi/2, pi/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyBatch,
    LengthMismatch,
    NumericalFailure,
    OutOfRange,
    SupportViolation,
    ZeroEnergy,
)
from .foa import Direction, FoaSignal, estimate_doa, TWO_PI


def _check_finite_angle(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def theta_error(gt: float, est: float) -> float:
    """Circular azimuth error in [0, pi].

    The raw difference is reduced modulo 2*pi and the shorter way around
    the circle is taken, so adding full turns to either argument does not
    change the result.
    """
    gt = _check_finite_angle(gt, "gt")
    est = _check_finite_angle(est, "est")
    raw = (gt - est) % TWO_PI
    return min(raw, TWO_PI - raw)


def phi_error(gt: float, est: float) -> float:
    """Absolute elevation error in [0, pi].

    Raises:
        OutOfRange: when either elevation leaves [-pi/2, pi/2].
    """
    gt = _check_finite_angle(gt, "gt")
    est = _check_finite_angle(est, "est")
    half_pi = math.pi / 2
    if abs(gt) > half_pi or abs(est) > half_pi:
        raise OutOfRange(
            f"elevations must lie in [-pi/2, pi/2], got {gt!r} and {est!r}"
        )
    return abs(gt - est)


def spatial_angle_error(gt: Direction, est: Direction) -> float:
    """Great-circle angle between two directions, in [0, pi].

    Computed with the haversine form, which stays accurate for nearly
    identical directions where the naive arccosine of a dot product loses
    precision.
    """
    d_el = gt.elevation - est.elevation
    d_az = theta_error(gt.azimuth, est.azimuth)
    a = math.sin(d_el / 2) ** 2 + (
        math.cos(gt.elevation) * math.cos(est.elevation) * math.sin(d_az / 2) ** 2
    )
    a = min(max(a, 0.0), 1.0)
    return 2.0 * abs(math.atan2(math.sqrt(a), math.sqrt(1.0 - a)))


@dataclass(frozen=True)
class AngleErrors:
    """Bundle of the three angular error measures."""

    d_theta: float
    d_phi: float
    d_angular: float


@dataclass(frozen=True)
class BatchDoaResult:
    """Mean angular errors over a batch, with the exclusion count."""

    errors: AngleErrors
    pairs_evaluated: int
    pairs_excluded: int


def eval_doa_batch(
    pairs: Sequence[tuple[FoaSignal, FoaSignal]],
) -> BatchDoaResult:
    """Mean direction-of-arrival errors over (reference, estimate) pairs.

    Pairs whose intensity is too weak to define a direction are excluded
    from the means and counted in ``pairs_excluded``.

    Raises:
        EmptyBatch: when the batch is empty or every pair was excluded.
    """
    if len(pairs) == 0:
        raise EmptyBatch("no signal pairs to evaluate")
    d_thetas: list[float] = []
    d_phis: list[float] = []
    d_angulars: list[float] = []
    excluded = 0
    for gt_signal, est_signal in pairs:
        try:
            gt = estimate_doa(gt_signal)
            est = estimate_doa(est_signal)
        except ZeroEnergy:
            excluded += 1
            continue
        d_thetas.append(theta_error(gt.azimuth, est.azimuth))
        d_phis.append(phi_error(gt.elevation, est.elevation))
        d_angulars.append(spatial_angle_error(gt, est))
    if not d_thetas:
        raise EmptyBatch(f"all {excluded} pairs were excluded as directionless")
    errors = AngleErrors(
        d_theta=float(np.mean(d_thetas)),
        d_phi=float(np.mean(d_phis)),
        d_angular=float(np.mean(d_angulars)),
    )
    return BatchDoaResult(errors, len(d_thetas), excluded)


# --- distribution distances -------------------------------------------------

def _as_feature_set(features, name: str) -> np.ndarray:
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D (n, d) array")
    if arr.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 rows to estimate covariance")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix via eigendecomposition."""
    values, vectors = np.linalg.eigh(matrix)
    values = _clamp_spectrum(values)
    return (vectors * np.sqrt(values)) @ vectors.T


def _clamp_spectrum(values: np.ndarray) -> np.ndarray:
    """Zero out round-off negatives; refuse genuinely indefinite input.

    The tolerance scales with the largest eigenvalue so that unit-scale
    and large-scale feature sets are treated alike.
    """
    tol = 1e-10 * max(1.0, float(values[-1]) if values.size else 1.0)
    smallest = float(values[0]) if values.size else 0.0
    if smallest < -tol:
        raise NumericalFailure(
            f"matrix square root failed: eigenvalue {smallest:.3e} below -{tol:.3e}"
        )
    return np.clip(values, 0.0, None)


def frechet_distance(a, b) -> float:
    """Fréchet distance between Gaussians fitted to two feature sets.

    Means and covariances (unbiased, n-1 denominator) are estimated from
    the rows of ``a`` and ``b``; the distance is

        |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The matrix square root is taken through the symmetrized product
    sqrt(S_a) S_b sqrt(S_a), which is PSD whenever the inputs are.

    Raises:
        DimensionMismatch: when the two sets have different feature widths.
        NumericalFailure: when the square root leaves the PSD regime.
    """
    a = _as_feature_set(a, "a")
    b = _as_feature_set(b, "b")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(
            f"feature widths differ: {a.shape[1]} vs {b.shape[1]}"
        )
    mu_a = a.mean(axis=0)
    mu_b = b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False, ddof=1).reshape(a.shape[1], a.shape[1])
    cov_b = np.cov(b, rowvar=False, ddof=1).reshape(b.shape[1], b.shape[1])

    root_a = _psd_sqrt(cov_a)
    product = root_a @ cov_b @ root_a
    product = (product + product.T) / 2.0
    cross_values = _clamp_spectrum(np.linalg.eigvalsh(product))
    trace_cross = float(np.sum(np.sqrt(cross_values)))

    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_cross)


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence sum(p * ln(p / q)) in nats.

    Terms with p == 0 contribute zero regardless of q.

    Raises:
        DimensionMismatch: when the vectors have different lengths.
        SupportViolation: when p puts mass where q has none.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 1 or q.ndim != 1:
        raise ValueError("label distributions must be 1-D")
    if p.shape != q.shape:
        raise DimensionMismatch(f"lengths differ: {p.shape[0]} vs {q.shape[0]}")
    for name, dist in (("p", p), ("q", q)):
        if np.any(dist < 0.0) or not np.all(np.isfinite(dist)):
            raise ValueError(f"{name} must be non-negative and finite")
        if abs(float(dist.sum()) - 1.0) > 1e-9:
            raise ValueError(f"{name} must sum to 1 within 1e-9")
    support = p > 0.0
    if np.any(support & (q == 0.0)):
        raise SupportViolation("p has mass on outcomes where q has none")
    ps = p[support]
    return float(np.sum(ps * np.log(ps / q[support])))


# --- multi-resolution spectrogram distance -----------------------------------

@dataclass(frozen=True)
class StftConfig:
    """Analysis resolutions for the spectrogram distance."""

    window_sizes: tuple[int, ...] = (512, 1024, 2048)
    hop_fraction: float = 0.25

    def __post_init__(self):
        sizes = tuple(int(w) for w in self.window_sizes)
        if len(sizes) == 0:
            raise ValueError("window_sizes must be non-empty")
        if any(w <= 0 for w in sizes):
            raise ValueError("window sizes must be positive")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("window sizes must be strictly increasing")
        object.__setattr__(self, "window_sizes", sizes)
        hop = float(self.hop_fraction)
        if not 0.0 < hop <= 1.0:
            raise ValueError("hop_fraction must lie in (0, 1]")
        object.__setattr__(self, "hop_fraction", hop)


_LOG_EPS = 1e-8
_NORM_EPS = 1e-12


def _magnitude_spectrogram(samples: np.ndarray, window: int, hop: int) -> np.ndarray:
    if samples.shape[0] < window:
        padded = np.zeros(window)
        padded[: samples.shape[0]] = samples
        samples = padded
    starts = np.arange(0, samples.shape[0] - window + 1, hop)
    frames = np.stack([samples[s : s + window] for s in starts])
    # Periodic Hann taper.
    taper = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window) / window)
    return np.abs(np.fft.rfft(frames * taper, axis=1))


def _single_resolution(a: np.ndarray, b: np.ndarray, window: int, hop: int) -> float:
    mag_a = _magnitude_spectrogram(a, window, hop)
    mag_b = _magnitude_spectrogram(b, window, hop)
    log_term = float(np.mean(np.abs(np.log(mag_a + _LOG_EPS) - np.log(mag_b + _LOG_EPS))))
    norm_a = float(np.linalg.norm(mag_a))
    convergence = float(np.linalg.norm(mag_a - mag_b)) / max(norm_a, _NORM_EPS)
    return log_term + convergence


def multires_stft_distance(
    a: FoaSignal, b: FoaSignal, config: StftConfig | None = None
) -> float:
    """Multi-resolution spectrogram distance between two ambisonic signals.

    For each analysis window size the distance adds an L1 log-magnitude
    term and a spectral-convergence term (Frobenius error normalized by
    the reference spectrogram norm); resolutions are averaged, and the
    four channels each contribute with weight 1/4.

    Raises:
        LengthMismatch: when lengths or sample rates differ.
    """
    if config is None:
        config = StftConfig()
    if a.n_samples != b.n_samples:
        raise LengthMismatch(
            f"signal lengths differ: {a.n_samples} vs {b.n_samples}"
        )
    if a.sample_rate != b.sample_rate:
        raise LengthMismatch(
            f"sample rates differ: {a.sample_rate} vs {b.sample_rate}"
        )
    channels_a = a.channel_matrix()
    channels_b = b.channel_matrix()
    per_resolution = []
    for window in config.window_sizes:
        hop = max(1, int(round(window * config.hop_fraction)))
        channel_terms = [
            _single_resolution(channels_a[c], channels_b[c], window, hop)
            for c in range(4)
        ]
        per_resolution.append(0.25 * float(np.sum(channel_terms)))
    return float(np.mean(per_resolution))
