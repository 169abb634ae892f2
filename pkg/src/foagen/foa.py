"""First-order ambisonics encoding and intensity-based direction estimation.

Conventions used throughout the package:

* azimuth is measured counterclockwise from the front axis, positive to
  the left, normalized into (-pi, pi];
* elevation is positive upward, restricted to [-pi/2, pi/2];
* all angles are radians (the CLI offers a degree switch, nothing else does).

A mono source at direction (azimuth, elevation) encodes as

    w = s / sqrt(2)
    x = cos(azimuth) * cos(elevation) * s
    y = sin(azimuth) * cos(elevation) * s
    z = sin(elevation) * s

and the time-averaged intensity vector (mean of w against each dipole
channel) inverts that encoding up to overall signal energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroEnergy

TWO_PI = 2.0 * math.pi

# Intensity magnitudes below this are treated as directionless silence.
INTENSITY_EPS = 1e-12


def wrap_azimuth(angle: float) -> float:
    """Normalize an angle in radians into (-pi, pi]."""
    if not math.isfinite(angle):
        raise ValueError(f"azimuth must be finite, got {angle!r}")
    wrapped = angle % TWO_PI  # [0, 2*pi)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


@dataclass(frozen=True)
class Direction:
    """A direction on the sphere: azimuth in (-pi, pi], elevation in [-pi/2, pi/2].

    The azimuth is wrapped on construction; the elevation is rejected when
    out of range rather than clamped.
    """

    azimuth: float
    elevation: float

    def __post_init__(self):
        object.__setattr__(self, "azimuth", wrap_azimuth(float(self.azimuth)))
        elevation = float(self.elevation)
        if not math.isfinite(elevation) or abs(elevation) > math.pi / 2:
            raise ValueError(
                f"elevation must lie in [-pi/2, pi/2], got {self.elevation!r}"
            )
        object.__setattr__(self, "elevation", elevation)

    def unit_vector(self) -> np.ndarray:
        """Cartesian unit vector (front, left, up) for this direction."""
        cos_el = math.cos(self.elevation)
        return np.array(
            [
                math.cos(self.azimuth) * cos_el,
                math.sin(self.azimuth) * cos_el,
                math.sin(self.elevation),
            ]
        )


def _as_samples(samples, name: str) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def _check_rate(sample_rate: int) -> int:
    rate = int(sample_rate)
    if rate <= 0:
        raise ValueError(f"sample_rate must be positive, got {sample_rate!r}")
    return rate


@dataclass(frozen=True)
class MonoSignal:
    """A single-channel signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_samples(self.samples, "samples"))
        object.__setattr__(self, "sample_rate", _check_rate(self.sample_rate))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class StereoSignal:
    """A two-channel signal; left and right must have equal length."""

    left: np.ndarray
    right: np.ndarray
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(self, "left", _as_samples(self.left, "left"))
        object.__setattr__(self, "right", _as_samples(self.right, "right"))
        object.__setattr__(self, "sample_rate", _check_rate(self.sample_rate))
        if self.left.shape != self.right.shape:
            raise ValueError("left and right channels must have equal length")

    @property
    def n_samples(self) -> int:
        return self.left.shape[0]


@dataclass(frozen=True)
class FoaSignal:
    """First-order ambisonics signal with channels w, x, y, z."""

    w: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    sample_rate: int

    def __post_init__(self):
        for name in ("w", "x", "y", "z"):
            object.__setattr__(self, name, _as_samples(getattr(self, name), name))
        object.__setattr__(self, "sample_rate", _check_rate(self.sample_rate))
        n = self.w.shape[0]
        if any(getattr(self, name).shape[0] != n for name in ("x", "y", "z")):
            raise ValueError("all four channels must have equal length")

    @property
    def n_samples(self) -> int:
        return self.w.shape[0]

    def channel_matrix(self) -> np.ndarray:
        """Channels stacked as a (4, n) array in w, x, y, z order."""
        return np.stack([self.w, self.x, self.y, self.z])


@dataclass(frozen=True)
class IntensityVector:
    """Time-averaged acoustic intensity along the three dipole axes."""

    ix: float
    iy: float
    iz: float

    def __post_init__(self):
        for name in ("ix", "iy", "iz"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.ix**2 + self.iy**2 + self.iz**2)


def spatialize_mono(signal: MonoSignal, direction: Direction) -> FoaSignal:
    """Encode a mono signal at a given direction into first-order ambisonics.

    The omni channel carries the signal scaled by 1/sqrt(2); the dipole
    channels carry it scaled by the direction cosines.
    """
    s = signal.samples
    cos_el = math.cos(direction.elevation)
    return FoaSignal(
        w=s / math.sqrt(2.0),
        x=math.cos(direction.azimuth) * cos_el * s,
        y=math.sin(direction.azimuth) * cos_el * s,
        z=math.sin(direction.elevation) * s,
        sample_rate=signal.sample_rate,
    )


def stereo_to_foa(signal: StereoSignal) -> FoaSignal:
    """Convert stereo to a degenerate ambisonic signal.

    The omni channel is the channel sum, the front-back dipole the channel
    difference, and the remaining dipoles are zero (a stereo pair carries
    no height or lateral phase information worth inventing).
    """
    n = signal.n_samples
    return FoaSignal(
        w=signal.left + signal.right,
        x=signal.left - signal.right,
        y=np.zeros(n),
        z=np.zeros(n),
        sample_rate=signal.sample_rate,
    )


def intensity_vector(signal: FoaSignal) -> IntensityVector:
    """Mean product of the omni channel with each dipole channel."""
    return IntensityVector(
        ix=float(np.mean(signal.w * signal.x)),
        iy=float(np.mean(signal.w * signal.y)),
        iz=float(np.mean(signal.w * signal.z)),
    )


def estimate_doa(signal: FoaSignal, eps: float = INTENSITY_EPS) -> Direction:
    """Estimate the direction of arrival from the intensity vector.

    Azimuth comes from the full two-argument arctangent of (iy, ix) so all
    four quadrants are recovered; elevation from the arctangent of iz
    against the horizontal intensity magnitude.

    Raises:
        ZeroEnergy: when the intensity magnitude falls below ``eps``.
    """
    iv = intensity_vector(signal)
    if iv.magnitude < eps:
        raise ZeroEnergy(
            f"intensity magnitude {iv.magnitude:.3e} below {eps:.3e}; "
            "direction undefined"
        )
    horizontal = math.hypot(iv.ix, iv.iy)
    if horizontal == 0.0:
        # Pole: azimuth is arbitrary, fixed at 0 by convention.
        return Direction(0.0, math.copysign(math.pi / 2, iv.iz))
    return Direction(math.atan2(iv.iy, iv.ix), math.atan2(iv.iz, horizontal))
