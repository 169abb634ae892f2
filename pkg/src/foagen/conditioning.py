"""Feature-to-latent conditioning utilities.

Visual features arrive at a coarser rate than audio latents, so they are
upsampled along time before fusion. Local features fuse by element-wise
addition once channel widths match (any projection to the latent width is
owned by the velocity model's input layer, not by this module); a global
summary is taken by per-channel max pooling over time.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch, ShrinkNotSupported


def _as_feature_seq(features, name: str = "features") -> np.ndarray:
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D (frames, channels) array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def upsample_features(
    features, target_len: int, mode: str = "nearest"
) -> np.ndarray:
    """Stretch an (F, C) feature sequence to ``target_len`` frames.

    Nearest-neighbor mode maps output frame i to input frame
    floor(i * F / target_len), which preserves the first and last frames
    and repeats each input frame a near-equal number of times. Linear
    mode interpolates between endpoint-aligned frame positions.

    Raises:
        ShrinkNotSupported: when ``target_len`` is shorter than the input.
    """
    arr = _as_feature_seq(features)
    frames = arr.shape[0]
    target_len = int(target_len)
    if target_len < frames:
        raise ShrinkNotSupported(
            f"cannot shrink {frames} frames to {target_len}; "
            "this op only stretches"
        )
    if mode == "nearest":
        indices = (np.arange(target_len) * frames) // target_len
        return arr[indices]
    if mode == "linear":
        if frames == 1:
            return np.repeat(arr, target_len, axis=0)
        positions = np.arange(target_len) * (frames - 1) / (target_len - 1)
        sources = np.arange(frames, dtype=np.float64)
        return np.stack(
            [np.interp(positions, sources, arr[:, c]) for c in range(arr.shape[1])],
            axis=1,
        )
    raise ValueError(f"unknown upsample mode {mode!r}")


def fuse_local(features_up, latent) -> np.ndarray:
    """Element-wise sum of an upsampled feature sequence and a latent.

    Raises:
        ShapeMismatch: when the two arrays do not already share a shape.
    """
    f = _as_feature_seq(features_up, "features_up")
    x = _as_feature_seq(latent, "latent")
    if f.shape != x.shape:
        raise ShapeMismatch(f"cannot fuse shapes {f.shape} and {x.shape}")
    return f + x


def pool_global(features) -> np.ndarray:
    """Per-channel maximum over time; the global condition vector."""
    arr = _as_feature_seq(features)
    return arr.max(axis=0)


def synth_features(
    seed: int, num_frames: int, num_channels: int, class_id: int
) -> np.ndarray:
    """Deterministic synthetic feature sequence whose mean encodes a class.

    Each channel's mean equals ``float(class_id)`` exactly, so distinct
    integer class ids are separated by at least 1.0 in every channel
    mean. The noise comes from shuffled integer +-k pairs scaled by a
    power of two: the pairs cancel exactly and every partial sum stays
    far below 2**53, which makes the centering float-exact rather than
    merely approximate. Useful as a stand-in for a real feature
    extractor in tests and fixtures.
    """
    if num_frames < 1 or num_channels < 1:
        raise ValueError("num_frames and num_channels must be >= 1")
    rng = np.random.default_rng([int(seed), int(class_id)])
    half = num_frames // 2
    mags = rng.integers(0, 1 << 15, size=(half, num_channels))
    parts = [mags, -mags]
    if num_frames % 2:
        parts.append(np.zeros((1, num_channels), dtype=np.int64))
    ints = rng.permuted(np.concatenate(parts, axis=0), axis=0)
    # amplitude 2**15 * 2**-17 = 0.25
    return float(class_id) + ints * 2.0**-17
