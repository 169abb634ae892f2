"""Per-frame velocity network with exact hand-rolled gradients.

The model is a small tanh MLP applied independently to every frame. Its
input is the concatenation of the current path point, the condition
channels, and the raw scalar time, so the first layer owns any projection
from condition width to hidden width. Gradients are accumulated by exact
reverse-mode differentiation; no framework is involved, which keeps the
arithmetic reproducible and easy to check against finite differences.

Checkpoints are a flat binary container: magic bytes, the layer widths,
then each layer's weight matrix (row-major) and bias vector as 64-bit
little-endian floats. The latent width is the last layer width and the
condition width is recoverable as widths[0] - widths[-1] - 1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import CorruptHeader, IoFailure, ShapeMismatch
from ..conditioning import fuse_local, upsample_features
from .masking import MaskedLatent

CHECKPOINT_MAGIC = b"FGVM0001"


@dataclass
class VelocityModel:
    """Tanh MLP mapping (time, condition, path point) to a velocity.

    Attributes:
        latent_dim: width of the per-frame latent (output width).
        cond_dim: width of the condition channels (0 for none).
        weights: per-layer (fan_in, fan_out) matrices.
        biases: per-layer (fan_out,) vectors.
    """

    latent_dim: int
    cond_dim: int
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if self.latent_dim < 1 or self.cond_dim < 0:
            raise ValueError("latent_dim must be >= 1 and cond_dim >= 0")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be non-empty and parallel")
        expected_in = self.latent_dim + self.cond_dim + 1
        if self.weights[0].shape[0] != expected_in:
            raise ValueError(
                f"first layer expects fan-in {expected_in}, "
                f"got {self.weights[0].shape[0]}"
            )
        if self.weights[-1].shape[1] != self.latent_dim:
            raise ValueError("last layer must emit latent_dim outputs")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i} weight/bias shapes inconsistent")
            if i > 0 and w.shape[0] != self.weights[i - 1].shape[1]:
                raise ValueError(f"layer {i} fan-in does not chain")

    @classmethod
    def initialize(
        cls,
        latent_dim: int,
        cond_dim: int,
        hidden: tuple[int, ...],
        rng: np.random.Generator,
    ) -> "VelocityModel":
        """Random init with 1/sqrt(fan_in) scaling; at least one hidden layer."""
        if not hidden:
            raise ValueError("at least one hidden layer is required")
        widths = [latent_dim + cond_dim + 1, *hidden, latent_dim]
        weights = []
        biases = []
        for fan_in, fan_out in zip(widths, widths[1:]):
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(latent_dim, cond_dim, weights, biases)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def _assemble_input(self, t: float, cond: np.ndarray | None, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.latent_dim:
            raise ShapeMismatch(
                f"path point must be (frames, {self.latent_dim}), got {x.shape}"
            )
        frames = x.shape[0]
        if self.cond_dim == 0:
            if cond is not None and np.asarray(cond).size:
                raise ShapeMismatch("model takes no condition channels")
            cond_block = np.zeros((frames, 0))
        else:
            if cond is None:
                cond_block = np.zeros((frames, self.cond_dim))
            else:
                cond_block = np.asarray(cond, dtype=np.float64)
                if cond_block.shape != (frames, self.cond_dim):
                    raise ShapeMismatch(
                        f"condition must be ({frames}, {self.cond_dim}), "
                        f"got {cond_block.shape}"
                    )
        t_column = np.full((frames, 1), float(t))
        return np.concatenate([x, cond_block, t_column], axis=1)

    def forward(self, t: float, cond: np.ndarray | None, x: np.ndarray) -> np.ndarray:
        """Velocity for each frame; deterministic in its inputs."""
        out, _ = self.forward_cached(t, cond, x)
        return out

    def forward_cached(
        self, t: float, cond: np.ndarray | None, x: np.ndarray
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass keeping layer activations for the backward pass."""
        activation = self._assemble_input(t, cond, x)
        cache = [activation]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            pre = activation @ w + b
            activation = pre if i == last else np.tanh(pre)
            cache.append(activation)
        return activation, cache

    def backward(
        self, cache: list[np.ndarray], grad_out: np.ndarray
    ) -> list[tuple[np.ndarray, np.ndarray]]:
        """Exact reverse-mode gradients of a scalar loss wrt all parameters.

        ``grad_out`` is the loss gradient at the network output. Returns
        one (dW, db) pair per layer, in layer order.
        """
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.weights)
        delta = np.asarray(grad_out, dtype=np.float64)
        for i in range(len(self.weights) - 1, -1, -1):
            inputs = cache[i]
            if i != len(self.weights) - 1:
                # Hidden activations are tanh(pre); cache stores tanh values.
                delta = delta * (1.0 - cache[i + 1] ** 2)
            grads[i] = (inputs.T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = delta @ self.weights[i].T
        return grads

    def apply_gradients(self, grads, learning_rate: float) -> None:
        """Plain SGD step, in place."""
        for (dw, db), w, b in zip(grads, self.weights, self.biases):
            w -= learning_rate * dw
            b -= learning_rate * db


def build_condition(
    masked: MaskedLatent,
    local: np.ndarray | None = None,
    global_cond: np.ndarray | None = None,
    fuse_local_features: bool = False,
) -> np.ndarray:
    """Assemble per-frame condition channels for the velocity model.

    The masked-latent view (hidden frames zeroed) always forms the first
    block. Local features are stretched to the latent frame count and
    either fused into the view by addition (when widths already match and
    ``fuse_local_features`` is set) or appended as extra channels. A
    global vector is tiled over frames and appended last.
    """
    view = masked.condition_view()
    frames = view.shape[0]
    blocks = []
    if local is not None:
        local = np.asarray(local, dtype=np.float64)
        if local.ndim != 2:
            raise ShapeMismatch("local features must be 2-D (frames, channels)")
        if local.shape[0] != frames:
            local = upsample_features(local, frames)
        if fuse_local_features:
            view = fuse_local(local, view)
        else:
            blocks.append(local)
    if global_cond is not None:
        vector = np.asarray(global_cond, dtype=np.float64)
        if vector.ndim != 1 or vector.size == 0:
            raise ShapeMismatch("global condition must be a non-empty vector")
        blocks.append(np.tile(vector, (frames, 1)))
    return np.concatenate([view, *blocks], axis=1)


def null_condition(frames: int, cond_dim: int) -> np.ndarray:
    """The unconditional branch: every condition channel zeroed.

    Matches what the model sees on fully masked training draws with
    absent external features.
    """
    return np.zeros((int(frames), int(cond_dim)))


def save_model(model: VelocityModel, path) -> None:
    """Write a checkpoint; see the module docstring for the layout."""
    widths = model.widths
    try:
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(widths)))
            fh.write(struct.pack(f"<{len(widths)}I", *widths))
            for w, b in zip(model.weights, model.biases):
                fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_model(path) -> VelocityModel:
    """Read a checkpoint written by :func:`save_model`.

    Raises:
        CorruptHeader: on bad magic, truncation, or impossible widths.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < len(CHECKPOINT_MAGIC) + 4:
        raise CorruptHeader("checkpoint shorter than its fixed header")
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CorruptHeader("bad checkpoint magic")
    offset = len(CHECKPOINT_MAGIC)
    (n_widths,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if n_widths < 3:
        raise CorruptHeader("checkpoint must describe at least one hidden layer")
    if len(blob) < offset + 4 * n_widths:
        raise CorruptHeader("checkpoint truncated in width table")
    widths = list(struct.unpack_from(f"<{n_widths}I", blob, offset))
    offset += 4 * n_widths
    latent_dim = widths[-1]
    cond_dim = widths[0] - latent_dim - 1
    if latent_dim < 1 or cond_dim < 0:
        raise CorruptHeader(f"width table {widths!r} is not a valid model")
    weights = []
    biases = []
    for fan_in, fan_out in zip(widths, widths[1:]):
        need = 8 * (fan_in * fan_out + fan_out)
        if len(blob) < offset + need:
            raise CorruptHeader("checkpoint truncated in parameter data")
        w = np.frombuffer(blob, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).copy())
        biases.append(b.copy())
    if offset != len(blob):
        raise CorruptHeader("checkpoint has trailing bytes")
    return VelocityModel(latent_dim, cond_dim, weights, biases)
