import numpy as np
import pytest

from foagen.errors import ShapeMismatch
from foagen.flow import (
    CfgSpec,
    MaskedLatent,
    VelocityModel,
    cfg_velocity,
    euler_sample,
)


class _ConstantField:
    """Stand-in model whose velocity is a fixed vector everywhere."""

    def __init__(self, v, cond_dim=0):
        self.v = np.asarray(v, dtype=float)
        self.latent_dim = self.v.shape[0]
        self.cond_dim = cond_dim

    def forward(self, t, cond, x):
        return np.broadcast_to(self.v, x.shape).copy()


class _StraightLineField:
    """Velocity x1 - x0 recovered from the current state and time."""

    def __init__(self, x1):
        self.x1 = np.asarray(x1, dtype=float)
        self.latent_dim = self.x1.shape[1]
        self.cond_dim = 0

    def forward(self, t, cond, x):
        # on the straight path x_t = t*x1 + (1-t)*x0, so x1 - x0 = (x1 - x_t)/(1-t)
        if t >= 1.0:
            raise AssertionError("sampler should evaluate at t < 1")
        return (self.x1 - x) / (1.0 - t)


def test_cfg_scale_one_returns_conditional_exactly():
    rng = np.random.default_rng(0)
    v_cond = rng.standard_normal((4, 3))
    v_uncond = rng.standard_normal((4, 3))
    out = cfg_velocity(v_cond, v_uncond, CfgSpec(1.0))
    assert np.array_equal(out, v_cond)
    assert out is not v_cond  # caller owns the result


def test_cfg_scale_zero_returns_unconditional_exactly():
    rng = np.random.default_rng(1)
    v_cond = rng.standard_normal((2, 2))
    v_uncond = rng.standard_normal((2, 2))
    assert np.array_equal(cfg_velocity(v_cond, v_uncond, CfgSpec(0.0)), v_uncond)


def test_cfg_blend_formula():
    v_cond = np.array([[2.0]])
    v_uncond = np.array([[1.0]])
    # 1 + 5 * (2 - 1) = 6
    assert cfg_velocity(v_cond, v_uncond, CfgSpec(5.0)) == np.array([[6.0]])


def test_cfg_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        cfg_velocity(np.zeros((2, 2)), np.zeros((3, 2)), CfgSpec(2.0))


def test_cfg_spec_rejects_non_finite():
    with pytest.raises(ValueError):
        CfgSpec(float("nan"))


def test_euler_constant_field_is_step_count_invariant():
    # sum of steps * (1/steps) * v telescopes to exactly one unit of v
    v = np.array([0.75, -1.5])
    start = np.array([[1.0, 2.0], [0.0, 0.0], [-3.0, 0.5]])
    for steps in (1, 2, 3, 7, 64):
        out = euler_sample(_ConstantField(v), steps, start=start)
        expect = start + v
        assert np.max(np.abs(out - expect)) <= 1e-12


def test_euler_single_step_moves_by_initial_velocity():
    x1 = np.array([[4.0, -1.0]])
    start = np.array([[1.0, 1.0]])
    out = euler_sample(_StraightLineField(x1), 1, start=start)
    # one step of size 1 along x1 - x0 lands exactly on x1
    np.testing.assert_allclose(out, x1, rtol=0, atol=1e-12)


def test_euler_zero_model_returns_start():
    model = _ConstantField(np.zeros(2))
    start = np.array([[1.0, -2.0]])
    out = euler_sample(model, 16, start=start)
    assert np.array_equal(out, start)


def test_euler_noise_start_is_seeded():
    model = _ConstantField(np.zeros(3))
    a = euler_sample(model, 4, frames=5, rng=np.random.default_rng(7))
    b = euler_sample(model, 4, frames=5, rng=np.random.default_rng(7))
    assert np.array_equal(a, b)
    assert a.shape == (5, 3)


def test_euler_validation_errors():
    model = _ConstantField(np.zeros(2))
    with pytest.raises(ValueError):
        euler_sample(model, 0, start=np.zeros((1, 2)))
    with pytest.raises(ShapeMismatch):
        euler_sample(model, 4, start=np.zeros((1, 3)))
    with pytest.raises(ValueError):
        euler_sample(model, 4)  # no start, no frames, no condition
    with pytest.raises(ValueError):
        euler_sample(model, 4, frames=3)  # noise start needs an rng


def test_euler_frames_from_masked_condition():
    model = VelocityModel.initialize(2, 2, (4,), np.random.default_rng(3))
    cond = MaskedLatent(np.zeros((6, 2)), np.ones(6, dtype=bool))
    out = euler_sample(model, 3, masked_cond=cond, rng=np.random.default_rng(1))
    assert out.shape == (6, 2)


def test_euler_condition_frame_mismatch():
    model = VelocityModel.initialize(2, 2, (4,), np.random.default_rng(4))
    cond = MaskedLatent(np.zeros((6, 2)), np.ones(6, dtype=bool))
    with pytest.raises(ShapeMismatch):
        euler_sample(model, 3, masked_cond=cond, start=np.zeros((4, 2)))


def test_guided_sampling_matches_manual_blend():
    """CFG inside the sampler equals blending the two fields by hand."""
    model = VelocityModel.initialize(2, 4, (5,), np.random.default_rng(6))
    g = np.array([1.0, -1.0])
    start = np.random.default_rng(8).standard_normal((3, 2))
    scale = 2.5

    got = euler_sample(
        model, 2, CfgSpec(scale), global_cond=g, start=start.copy()
    )

    from foagen.flow import build_condition, null_condition

    hidden = MaskedLatent(np.zeros((3, 2)), np.ones(3, dtype=bool))
    cond = build_condition(hidden, None, g, False)
    uncond = null_condition(3, model.cond_dim)
    x = start.copy()
    for k in range(2):
        t = k / 2
        v = uncond_v = model.forward(t, uncond, x)
        cond_v = model.forward(t, cond, x)
        v = uncond_v + scale * (cond_v - uncond_v)
        x = x + 0.5 * v
    np.testing.assert_allclose(got, x, rtol=0, atol=1e-12)
