"""Equirectangular panorama geometry: padding, perspective cuts, and a
frame-stationarity check.

Frames are (height, width, channels) float arrays with values in [0, 1]
and 1 or 3 channels. An equirectangular (ERP) frame spans 360 degrees of
longitude by 180 of latitude and therefore has a 2:1 aspect ratio; its
pixel grid maps to angles through

    u = (longitude / 2*pi + 0.5) * width
    v = (0.5  - latitude / pi)  * height

with longitude in [-pi, pi) increasing to the image right and latitude
in [-pi/2, pi/2] increasing upward.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CorruptHeader,
    IoFailure,
    NotErpAspect,
    ShapeMismatch,
    TooFewFrames,
    UnsupportedFormat,
)
from .foa import wrap_azimuth

FRAME_MAGIC = b"FFRM0001"


def _as_frame(frame, name: str = "frame") -> np.ndarray:
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(
            f"{name} must be (height, width, channels) with 1 or 3 channels, "
            f"got shape {arr.shape}"
        )
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} has an empty axis: {arr.shape}")
    return arr


def _check_erp(frame: np.ndarray) -> np.ndarray:
    if frame.shape[1] != 2 * frame.shape[0]:
        raise NotErpAspect(
            f"equirectangular frames are 2:1, got {frame.shape[0]}x{frame.shape[1]}"
        )
    return frame


@dataclass(frozen=True)
class CameraSpec:
    """Pinhole camera pointed at (yaw, pitch) with a horizontal FOV.

    The yaw is wrapped into (-pi, pi] on construction so cuts just past
    the seam are bit-identical to their wrapped equivalents. The vertical
    FOV follows from the output aspect ratio.
    """

    yaw: float = 0.0
    pitch: float = 0.0
    hfov: float = 2.0 * math.pi / 3.0
    out_width: int = 256
    out_height: int = 256

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_azimuth(float(self.yaw)))
        pitch = float(self.pitch)
        if not math.isfinite(pitch) or abs(pitch) > math.pi / 2:
            raise ValueError(f"pitch must lie in [-pi/2, pi/2], got {self.pitch!r}")
        object.__setattr__(self, "pitch", pitch)
        hfov = float(self.hfov)
        if not 0.0 < hfov < math.pi:
            raise ValueError(f"hfov must lie in (0, pi), got {self.hfov!r}")
        object.__setattr__(self, "hfov", hfov)
        if int(self.out_width) < 1 or int(self.out_height) < 1:
            raise ValueError("output dimensions must be >= 1")
        object.__setattr__(self, "out_width", int(self.out_width))
        object.__setattr__(self, "out_height", int(self.out_height))


def pad_to_square(erp) -> np.ndarray:
    """Zero-pad a 2:1 ERP frame to a square, keeping it vertically centered.

    The extra rows split evenly above and below; an odd remainder goes
    below.

    Raises:
        NotErpAspect: when the input is not 2:1.
    """
    frame = _check_erp(_as_frame(erp))
    height, width, channels = frame.shape
    pad_total = width - height
    pad_top = pad_total // 2
    out = np.zeros((width, width, channels))
    out[pad_top : pad_top + height] = frame
    return out


def _bilinear_wrap_clamp(erp: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear sample at area coordinates (u, v); horizontal wrap,
    vertical clamp.

    Uses the nested-lerp form so sampling a constant image returns the
    constant exactly.
    """
    height, width = erp.shape[0], erp.shape[1]
    x = u - 0.5
    y = v - 0.5
    j0 = np.floor(x).astype(np.int64)
    i0 = np.floor(y).astype(np.int64)
    fx = (x - j0)[..., None]
    fy = (y - i0)[..., None]
    j0w = j0 % width
    j1w = (j0 + 1) % width
    i0c = np.clip(i0, 0, height - 1)
    i1c = np.clip(i0 + 1, 0, height - 1)
    top = erp[i0c, j0w]
    top = top + fx * (erp[i0c, j1w] - top)
    bottom = erp[i1c, j0w]
    bottom = bottom + fx * (erp[i1c, j1w] - bottom)
    return top + fy * (bottom - top)


def erp_to_perspective(erp, camera: CameraSpec) -> np.ndarray:
    """Gnomonic (pinhole) cut of an ERP frame.

    Each output pixel's camera-plane ray is rotated by yaw about the
    vertical axis and pitch about the camera's lateral axis, converted to
    longitude and latitude, and sampled from the ERP grid bilinearly with
    horizontal wraparound and vertical clamping.

    Raises:
        NotErpAspect: when the input is not 2:1.
    """
    frame = _check_erp(_as_frame(erp))
    height, width = frame.shape[0], frame.shape[1]
    half_w = math.tan(camera.hfov / 2.0)
    half_h = half_w * camera.out_height / camera.out_width

    ndc_x = (np.arange(camera.out_width) + 0.5) / camera.out_width * 2.0 - 1.0
    ndc_y = (np.arange(camera.out_height) + 0.5) / camera.out_height * 2.0 - 1.0
    cam_left = np.broadcast_to(ndc_x * half_w, (camera.out_height, camera.out_width))
    cam_up = np.broadcast_to(
        (-ndc_y * half_h)[:, None], (camera.out_height, camera.out_width)
    )
    cam_front = np.ones((camera.out_height, camera.out_width))

    cos_p, sin_p = math.cos(camera.pitch), math.sin(camera.pitch)
    cos_y, sin_y = math.cos(camera.yaw), math.sin(camera.yaw)
    # Pitch about the lateral axis, then yaw about the vertical axis.
    x_p = cos_p * cam_front - sin_p * cam_up
    z_w = sin_p * cam_front + cos_p * cam_up
    x_w = cos_y * x_p - sin_y * cam_left
    y_w = sin_y * x_p + cos_y * cam_left

    longitude = np.arctan2(y_w, x_w)
    latitude = np.arctan2(z_w, np.hypot(x_w, y_w))
    u = (longitude / (2.0 * math.pi) + 0.5) * width
    v = (0.5 - latitude / math.pi) * height
    return _bilinear_wrap_clamp(frame, u, v)


# Preset cut directions as (yaw, pitch) pairs.
FOV_PRESETS: dict[str, tuple[tuple[float, float], ...]] = {
    "front": ((0.0, 0.0),),
    "2cuts": ((0.0, 0.0), (math.pi, 0.0)),
    "4cuts": (
        (0.0, 0.0),
        (math.pi / 2, 0.0),
        (math.pi, 0.0),
        (3 * math.pi / 2, 0.0),
    ),
    "6cuts": (
        (0.0, 0.0),
        (math.pi / 2, 0.0),
        (math.pi, 0.0),
        (3 * math.pi / 2, 0.0),
        (0.0, math.pi / 2),
        (0.0, -math.pi / 2),
    ),
}


def make_fov_cuts(
    erp,
    preset: str,
    hfov: float = 2.0 * math.pi / 3.0,
    out_width: int = 256,
    out_height: int = 256,
) -> list[np.ndarray]:
    """Perspective cuts for a named direction preset.

    Presets: ``front`` (one forward view), ``2cuts`` (front/back),
    ``4cuts`` (four compass directions), ``6cuts`` (compass plus up and
    down).
    """
    if preset not in FOV_PRESETS:
        raise ValueError(
            f"unknown preset {preset!r}; expected one of {sorted(FOV_PRESETS)}"
        )
    return [
        erp_to_perspective(
            erp,
            CameraSpec(
                yaw=yaw,
                pitch=pitch,
                hfov=hfov,
                out_width=out_width,
                out_height=out_height,
            ),
        )
        for yaw, pitch in FOV_PRESETS[preset]
    ]


def frame_mse(a, b) -> float:
    """Mean squared pixel difference.

    Raises:
        ShapeMismatch: when the frames differ in shape.
    """
    fa = _as_frame(a, "a")
    fb = _as_frame(b, "b")
    if fa.shape != fb.shape:
        raise ShapeMismatch(f"frame shapes differ: {fa.shape} vs {fb.shape}")
    return float(np.mean((fa - fb) ** 2))


@dataclass(frozen=True)
class StationarityResult:
    """Outcome of the frame-stationarity check."""

    stationary: bool
    ratio: float
    comparisons: int


def stationarity_verdict(
    frames: Sequence[np.ndarray],
    interval: int = 8,
    mse_threshold: float = 1e-3,
    ratio_threshold: float = 0.85,
) -> StationarityResult:
    """Decide whether a frame sequence is mostly static.

    Frames i and i + interval are compared for i = 0, interval,
    2*interval, ...; a comparison counts as stationary when its MSE falls
    strictly below ``mse_threshold``, and the sequence is stationary when
    the stationary fraction strictly exceeds ``ratio_threshold``.

    Raises:
        TooFewFrames: when fewer than two comparisons are available.
    """
    interval = int(interval)
    if interval < 1:
        raise ValueError(f"interval must be >= 1, got {interval!r}")
    n = len(frames)
    comparisons = max(0, (n - 1)) // interval
    if comparisons < 2:
        raise TooFewFrames(
            f"{n} frames at interval {interval} give {comparisons} comparisons; "
            "need at least 2"
        )
    stationary_count = 0
    for k in range(comparisons):
        i = k * interval
        if frame_mse(frames[i], frames[i + interval]) < mse_threshold:
            stationary_count += 1
    ratio = stationary_count / comparisons
    return StationarityResult(ratio > ratio_threshold, ratio, comparisons)


# --- frame file I/O ----------------------------------------------------------
#
# Two interchange forms: binary portable anymaps (P5 grayscale, P6 color,
# 8- or 16-bit) and a raw float container (magic, dims, row-major float64)
# that preserves values exactly.

def write_frame(path, frame, bit_depth: int = 8) -> None:
    """Write a frame; format chosen by extension (.pgm/.ppm/.fframe)."""
    arr = _as_frame(frame)
    name = str(path)
    try:
        if name.endswith(".fframe"):
            _write_frame_raw(name, arr)
        elif name.endswith(".pgm") or name.endswith(".ppm"):
            _write_pnm(name, arr, bit_depth)
        else:
            raise UnsupportedFormat(f"cannot infer frame format from {name!r}")
    except OSError as exc:
        raise IoFailure(f"cannot write frame {name}: {exc}") from exc


def read_frame(path) -> np.ndarray:
    """Read a frame written by :func:`write_frame`."""
    name = str(path)
    try:
        with open(name, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read frame {name}: {exc}") from exc
    if blob[:8] == FRAME_MAGIC:
        return _parse_frame_raw(blob)
    if blob[:2] in (b"P5", b"P6"):
        return _parse_pnm(blob)
    raise UnsupportedFormat(f"{name!r} is neither a portable anymap nor a raw frame")


def _write_pnm(name: str, arr: np.ndarray, bit_depth: int) -> None:
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth!r}")
    height, width, channels = arr.shape
    if name.endswith(".pgm") and channels != 1:
        raise UnsupportedFormat("grayscale .pgm needs a single-channel frame")
    if name.endswith(".ppm") and channels != 3:
        raise UnsupportedFormat("color .ppm needs a three-channel frame")
    maxval = (1 << bit_depth) - 1
    quantized = np.clip(np.rint(arr * maxval), 0, maxval)
    payload = quantized.astype(">u2" if bit_depth == 16 else "u1").tobytes()
    magic = b"P5" if channels == 1 else b"P6"
    header = b"%s\n%d %d\n%d\n" % (magic, width, height, maxval)
    with open(name, "wb") as fh:
        fh.write(header + payload)


def _parse_pnm(blob: bytes) -> np.ndarray:
    # Header: magic, width, height, maxval as whitespace-separated tokens
    # with optional '#' comments, then a single whitespace byte.
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(blob):
            raise CorruptHeader("portable anymap header truncated")
        byte = blob[pos : pos + 1]
        if byte == b"#":
            end = blob.find(b"\n", pos)
            if end < 0:
                raise CorruptHeader("unterminated comment in anymap header")
            pos = end + 1
        elif byte.isspace():
            pos += 1
        else:
            end = pos
            while end < len(blob) and not blob[end : end + 1].isspace():
                end += 1
            try:
                tokens.append(int(blob[pos:end]))
            except ValueError as exc:
                raise CorruptHeader(f"bad anymap header token {blob[pos:end]!r}") from exc
            pos = end
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise CorruptHeader(f"bad anymap dimensions {width}x{height}")
    if maxval not in (255, 65535):
        raise UnsupportedFormat(f"maxval {maxval} unsupported; use 255 or 65535")
    channels = 1 if blob[:2] == b"P5" else 3
    dtype = np.dtype("u1") if maxval == 255 else np.dtype(">u2")
    count = width * height * channels
    if len(blob) - pos < count * dtype.itemsize:
        raise CorruptHeader("anymap pixel data truncated")
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=pos)
    return data.astype(np.float64).reshape(height, width, channels) / maxval


def _write_frame_raw(name: str, arr: np.ndarray) -> None:
    height, width, channels = arr.shape
    with open(name, "wb") as fh:
        fh.write(FRAME_MAGIC)
        fh.write(struct.pack("<QQQ", height, width, channels))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _parse_frame_raw(blob: bytes) -> np.ndarray:
    if len(blob) < 8 + 24:
        raise CorruptHeader("raw frame header truncated")
    height, width, channels = struct.unpack_from("<QQQ", blob, 8)
    if channels not in (1, 3) or height < 1 or width < 1:
        raise CorruptHeader(f"bad raw frame dims {height}x{width}x{channels}")
    count = height * width * channels
    if len(blob) != 8 + 24 + 8 * count:
        raise CorruptHeader("raw frame payload size mismatch")
    data = np.frombuffer(blob, dtype="<f8", count=count, offset=32)
    return data.reshape(int(height), int(width), int(channels)).copy()
