"""Conditional flow-matching objective and a plain-SGD training loop.

Each step draws fresh noise, a path time, and a mask; the loss is the
mean squared error between the predicted velocity and the displacement
x1 - x0, taken over hidden frames during masked pretraining or over all
frames during conditional fine-tuning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergenceDetected, NoMaskedFrames, ShapeMismatch
from .masking import MaskSpec, MaskedLatent, make_mask, random_mask_spec
from .network import VelocityModel, build_condition
from .path import TimeSampler, sample_time, as_latent


def cfm_loss(
    model: VelocityModel,
    x0,
    x1,
    t: float,
    cond: MaskedLatent,
    local: np.ndarray | None = None,
    global_cond: np.ndarray | None = None,
    fuse_local_features: bool = False,
    masked_frames_only: bool = True,
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Flow-matching loss and exact parameter gradients for one draw.

    The path point t*x1 + (1-t)*x0 and the condition channels are fed to
    the model; the loss is the mean over the selected frames (hidden
    frames by default, every frame when ``masked_frames_only`` is False)
    and latent dimensions of the squared velocity error.

    Raises:
        NoMaskedFrames: when the hidden-frames variant selects nothing.
        ShapeMismatch: when x0 and x1 disagree in shape.
    """
    a = as_latent(x0, "x0")
    b = as_latent(x1, "x1")
    if a.shape != b.shape:
        raise ShapeMismatch(f"x0 and x1 shapes differ: {a.shape} vs {b.shape}")
    t = float(t)
    xt = t * b + (1.0 - t) * a
    target = b - a

    if masked_frames_only:
        selected = cond.mask
        if not bool(selected.any()):
            raise NoMaskedFrames("mask hides no frames; nothing to train on")
    else:
        selected = np.ones(a.shape[0], dtype=bool)

    cond_matrix = build_condition(cond, local, global_cond, fuse_local_features)
    predicted, cache = model.forward_cached(t, cond_matrix, xt)
    residual = predicted - target
    n_terms = int(selected.sum()) * a.shape[1]
    loss = float(np.sum(residual[selected] ** 2) / n_terms)

    grad_out = np.zeros_like(residual)
    grad_out[selected] = 2.0 * residual[selected] / n_terms
    grads = model.backward(cache, grad_out)
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters for the SGD loop.

    ``mask_spec`` set to None means every draw uses a fully hidden mask
    (the unconditional path). ``masked_frames_only`` selects which frames
    the loss covers when a partial mask is drawn; fine-tuning sets it to
    False so the loss covers the whole sequence. ``span_choices`` varies
    the span count per draw when set; None keeps the mask spec's count fixed.
    ``cond_dropout`` is the probability of zeroing the external condition
    for a draw, which trains the guidance-ready unconditional branch.
    """

    learning_rate: float = 0.05
    batch_size: int = 16
    steps: int = 1000
    seed: int = 0
    time_sampler: TimeSampler = field(default_factory=TimeSampler)
    mask_spec: MaskSpec | None = None
    masked_frames_only: bool = True
    span_choices: tuple[int, ...] | None = None
    cond_dropout: float = 0.0
    fuse_local_features: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.steps < 1:
            raise ValueError("batch_size and steps must be >= 1")
        if not 0.0 <= self.cond_dropout <= 1.0:
            raise ValueError("cond_dropout must lie in [0, 1]")


def _accumulate(total, grads, scale: float):
    if total is None:
        return [(dw * scale, db * scale) for dw, db in grads]
    return [
        (tw + dw * scale, tb + db * scale)
        for (tw, tb), (dw, db) in zip(total, grads)
    ]


def train(
    model: VelocityModel,
    dataset,
    config: TrainConfig,
) -> list[float]:
    """Train in place; returns the per-step batch loss trace.

    ``dataset`` is a sequence of (x1, cond) pairs where x1 is a
    (frames, dims) latent and cond is an external condition: None, a
    vector applied globally, or a (frames, channels) matrix of local
    features. Identical seeds give bit-identical traces.

    Raises:
        DivergenceDetected: as soon as a batch loss is non-finite.
    """
    if len(dataset) == 0:
        raise ValueError("dataset must be non-empty")
    rng = np.random.default_rng(config.seed)
    trace: list[float] = []
    for step in range(config.steps):
        indices = rng.integers(0, len(dataset), size=config.batch_size)
        batch_loss = 0.0
        batch_grads = None
        for index in indices:
            x1, external = dataset[int(index)]
            x1 = as_latent(x1, "x1")
            frames = x1.shape[0]
            x0 = rng.standard_normal(x1.shape)
            t = sample_time(config.time_sampler, rng)
            if config.mask_spec is not None:
                spec = config.mask_spec
                if config.span_choices is not None:
                    spec = random_mask_spec(spec, frames, rng, config.span_choices)
                mask, _ = make_mask(frames, spec, rng)
            else:
                mask = np.ones(frames, dtype=bool)
            local = global_cond = None
            if external is not None:
                arr = np.asarray(external, dtype=np.float64)
                if config.cond_dropout > 0.0 and rng.random() < config.cond_dropout:
                    arr = np.zeros_like(arr)
                if arr.ndim == 1:
                    global_cond = arr
                else:
                    local = arr
            loss, grads = cfm_loss(
                model,
                x0,
                x1,
                t,
                MaskedLatent(x1, mask),
                local=local,
                global_cond=global_cond,
                fuse_local_features=config.fuse_local_features,
                masked_frames_only=config.masked_frames_only,
            )
            batch_loss += loss / config.batch_size
            batch_grads = _accumulate(batch_grads, grads, 1.0 / config.batch_size)
        if not np.isfinite(batch_loss):
            raise DivergenceDetected(
                f"non-finite loss {batch_loss!r} at step {step}"
            )
        model.apply_gradients(batch_grads, config.learning_rate)
        trace.append(batch_loss)
    return trace
