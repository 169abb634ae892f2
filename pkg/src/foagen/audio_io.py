"""Bit-exact multichannel WAV I/O and matrix serialization.

WAV support covers RIFF/WAVE files holding 16-bit PCM or 32-bit IEEE
float samples with 1, 2, or 4 channels. Four-channel files carry
ambisonic channels in w, x, y, z order on disk by default; the ``ambix``
switch reads and writes the alternative ordering (w, y, z, x) with the
omni channel scaled up by sqrt(2).

PCM decoding divides by 32768 so the most negative code maps to -1.0
exactly; encoding rounds half away from zero and saturates at the int16
limits. Float32 files round-trip bit-exactly.

Feature matrices travel either as delimited text (one row per line) or
as a flat binary container: magic bytes, row/column counts, then
row-major 64-bit little-endian floats.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .errors import (
    ChannelCountUnsupported,
    CorruptHeader,
    IoFailure,
    ParseError,
    SpecMismatch,
    UnsupportedFormat,
)
from .foa import FoaSignal, MonoSignal, StereoSignal

MATRIX_MAGIC = b"FMAT0001"

_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3

_AMBIX_SCALE = math.sqrt(2.0)


def signal_channels(signal) -> np.ndarray:
    """Any supported signal as a (channels, n) float64 array."""
    if isinstance(signal, MonoSignal):
        return signal.samples[None, :]
    if isinstance(signal, StereoSignal):
        return np.stack([signal.left, signal.right])
    if isinstance(signal, FoaSignal):
        return signal.channel_matrix()
    raise TypeError(f"unsupported signal type {type(signal).__name__}")


def signal_from_channels(channels: np.ndarray, sample_rate: int):
    """Build the right signal type for a (channels, n) array."""
    n_channels = channels.shape[0]
    if n_channels == 1:
        return MonoSignal(channels[0], sample_rate)
    if n_channels == 2:
        return StereoSignal(channels[0], channels[1], sample_rate)
    if n_channels == 4:
        return FoaSignal(
            channels[0], channels[1], channels[2], channels[3], sample_rate
        )
    raise ChannelCountUnsupported(
        f"{n_channels} channels unsupported; expected 1, 2, or 4"
    )


def pcm16_encode(samples: np.ndarray) -> np.ndarray:
    """Float samples to int16 codes: scale by 32768, round half away
    from zero, saturate at the int16 limits."""
    scaled = np.asarray(samples, dtype=np.float64) * 32768.0
    rounded = np.copysign(np.floor(np.abs(scaled) + 0.5), scaled)
    return np.clip(rounded, -32768, 32767).astype("<i2")


def pcm16_decode(codes: np.ndarray) -> np.ndarray:
    """Int16 codes to floats on the [-1.0, 32767/32768] grid."""
    return np.asarray(codes, dtype=np.float64) / 32768.0


def _float32_encode(samples: np.ndarray) -> np.ndarray:
    return np.asarray(samples, dtype="<f4")


class WavSpec:
    """Target encoding for a WAV file."""

    __slots__ = ("channels", "sample_rate", "encoding")

    def __init__(self, channels: int, sample_rate: int, encoding: str = "float32"):
        if channels not in (1, 2, 4):
            raise ChannelCountUnsupported(
                f"{channels} channels unsupported; expected 1, 2, or 4"
            )
        if sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if encoding not in ("pcm16", "float32"):
            raise UnsupportedFormat(
                f"encoding {encoding!r} unsupported; use 'pcm16' or 'float32'"
            )
        self.channels = int(channels)
        self.sample_rate = int(sample_rate)
        self.encoding = encoding

    def __repr__(self):
        return (
            f"WavSpec(channels={self.channels}, sample_rate={self.sample_rate}, "
            f"encoding={self.encoding!r})"
        )


def _chunks(blob: bytes):
    """Iterate (fourcc, payload) pairs of a RIFF body."""
    pos = 12
    while pos + 8 <= len(blob):
        fourcc = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        payload = blob[pos + 8 : pos + 8 + size]
        if len(payload) < size:
            raise CorruptHeader(f"chunk {fourcc!r} truncated")
        yield fourcc, payload
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def read_wav(path, ambix: bool = False):
    """Read a WAV file into the signal type matching its channel count.

    Raises:
        CorruptHeader: malformed or truncated RIFF structure.
        UnsupportedFormat: an encoding other than pcm16/float32.
        ChannelCountUnsupported: a channel count outside {1, 2, 4}.
        IoFailure: the underlying read failed.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise CorruptHeader(f"{path} is not a RIFF/WAVE file")

    fmt = None
    data = None
    for fourcc, payload in _chunks(blob):
        if fourcc == b"fmt " and fmt is None:
            if len(payload) < 16:
                raise CorruptHeader("fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", payload, 0)
        elif fourcc == b"data" and data is None:
            data = payload
    if fmt is None or data is None:
        raise CorruptHeader("missing fmt or data chunk")

    audio_format, channels, sample_rate, _, block_align, bits = fmt
    if audio_format == _WAVE_FORMAT_PCM:
        if bits != 16:
            raise UnsupportedFormat(f"{bits}-bit PCM unsupported; only 16")
        dtype = np.dtype("<i2")
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedFormat(f"{bits}-bit float unsupported; only 32")
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedFormat(f"WAVE format tag {audio_format} unsupported")
    if channels not in (1, 2, 4):
        raise ChannelCountUnsupported(
            f"{channels} channels unsupported; expected 1, 2, or 4"
        )
    frame_bytes = channels * dtype.itemsize
    if block_align not in (0, frame_bytes):
        raise CorruptHeader(
            f"block align {block_align} inconsistent with {frame_bytes}-byte frames"
        )
    n_frames = len(data) // frame_bytes
    if n_frames == 0:
        raise CorruptHeader("data chunk holds no complete frame")
    raw = np.frombuffer(data, dtype=dtype, count=n_frames * channels)
    interleaved = raw.reshape(n_frames, channels)
    if audio_format == _WAVE_FORMAT_PCM:
        matrix = pcm16_decode(interleaved.T)
    else:
        matrix = interleaved.T.astype(np.float64)
    if ambix:
        if channels != 4:
            raise SpecMismatch("ambix ordering applies to 4-channel files only")
        w, y, z, x = matrix
        matrix = np.stack([w / _AMBIX_SCALE, x, y, z])
    return signal_from_channels(matrix, sample_rate)


def write_wav(signal, path, spec: WavSpec | None = None, ambix: bool = False) -> None:
    """Write a signal as RIFF/WAVE.

    With no spec the file is float32 at the signal's own layout. A spec
    whose channel count or sample rate disagrees with the signal raises
    SpecMismatch rather than silently converting.
    """
    matrix = signal_channels(signal)
    if spec is None:
        spec = WavSpec(matrix.shape[0], signal.sample_rate)
    if spec.channels != matrix.shape[0]:
        raise SpecMismatch(
            f"spec wants {spec.channels} channels, signal has {matrix.shape[0]}"
        )
    if spec.sample_rate != signal.sample_rate:
        raise SpecMismatch(
            f"spec wants {spec.sample_rate} Hz, signal is {signal.sample_rate} Hz"
        )
    if ambix:
        if matrix.shape[0] != 4:
            raise SpecMismatch("ambix ordering applies to 4-channel signals only")
        w, x, y, z = matrix
        matrix = np.stack([w * _AMBIX_SCALE, y, z, x])

    if spec.encoding == "pcm16":
        payload_arr = pcm16_encode(matrix.T)
        bits = 16
        format_tag = _WAVE_FORMAT_PCM
    else:
        payload_arr = _float32_encode(matrix.T)
        bits = 32
        format_tag = _WAVE_FORMAT_IEEE_FLOAT
    payload = np.ascontiguousarray(payload_arr).tobytes()

    block_align = spec.channels * bits // 8
    byte_rate = spec.sample_rate * block_align
    fmt = struct.pack(
        "<HHIIHH", format_tag, spec.channels, spec.sample_rate,
        byte_rate, block_align, bits,
    )
    chunks = [(b"fmt ", fmt)]
    if format_tag == _WAVE_FORMAT_IEEE_FLOAT:
        # Non-PCM files carry a fact chunk with the frame count.
        chunks.append((b"fact", struct.pack("<I", matrix.shape[1])))
    chunks.append((b"data", payload))

    body = b"WAVE"
    for fourcc, chunk in chunks:
        body += fourcc + struct.pack("<I", len(chunk)) + chunk
        if len(chunk) & 1:
            body += b"\x00"
    try:
        with open(path, "wb") as fh:
            fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# --- matrix containers -----------------------------------------------------------

def write_matrix(path, matrix) -> None:
    """Write a 2-D float64 matrix to the flat binary container."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("matrix must be 2-D")
    try:
        with open(path, "wb") as fh:
            fh.write(MATRIX_MAGIC)
            fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write matrix {path}: {exc}") from exc


def read_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix`; bit-exact."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read matrix {path}: {exc}") from exc
    if len(blob) < 8 + 16 or blob[:8] != MATRIX_MAGIC:
        raise CorruptHeader(f"{path} is not a matrix container")
    rows, cols = struct.unpack_from("<QQ", blob, 8)
    count = rows * cols
    if len(blob) != 24 + 8 * count:
        raise CorruptHeader("matrix payload size mismatch")
    data = np.frombuffer(blob, dtype="<f8", count=count, offset=24)
    return data.reshape(int(rows), int(cols)).copy()


def write_matrix_text(path, matrix, fmt: str = "%.17g") -> None:
    """Write a matrix as delimited text, one row per line."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("matrix must be 1-D or 2-D")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for row in arr:
                fh.write(" ".join(fmt % value for value in row) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write matrix {path}: {exc}") from exc


def read_matrix_text(path) -> np.ndarray:
    """Read whitespace- or comma-delimited text, one row per line.

    Raises:
        ParseError: naming the line of the first bad token or ragged row.
    """
    rows: list[list[float]] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoFailure(f"cannot read matrix {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.replace(",", " ").split()
        try:
            row = [float(token) for token in tokens]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad number ({exc})") from exc
        if rows and len(row) != len(rows[0]):
            raise ParseError(
                f"line {lineno}: expected {len(rows[0])} columns, got {len(row)}"
            )
        rows.append(row)
    if not rows:
        raise ParseError(f"{path} holds no data rows")
    return np.asarray(rows, dtype=np.float64)


def read_matrix_any(path) -> np.ndarray:
    """Read a matrix from the binary container or delimited text."""
    name = str(path)
    if name.endswith(".fmat"):
        return read_matrix(name)
    return read_matrix_text(name)
