"""Gradient correctness against central finite differences."""
import numpy as np
import pytest

from statecoder.errors import NumericalError
from statecoder.neuralcore import ModelConfig, backward, init_params
from statecoder.neuralcore.backprop import clip_gradients, global_norm
from statecoder.neuralcore.model import (
    _forward_batch,
    mse_loss,
    reconstruct,
    sample_dropout_masks,
)

FD_STEP = 1e-5
# guarded relative error: entries far below the typical gradient magnitude
# sit at the float64 cancellation floor of the finite difference itself,
# so the denominator never drops below 1e-6
FD_FLOOR = 1e-6


def fd_check(config, seed, masks=None):
    rng = np.random.default_rng(seed)
    params = init_params(config, rng)
    window = rng.normal(size=(config.T, config.P))
    target = rng.normal(size=(config.T, config.K))
    grads = backward(params, window, target, masks=masks)

    def loss():
        cache = _forward_batch(params, window[None, :, :], masks)
        return mse_loss(cache.decode.y[:, 0, :], target)

    worst = 0.0
    for name, arr in params.tensors().items():
        g = grads[name].ravel()
        flat = arr.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + FD_STEP
            up = loss()
            flat[idx] = orig - FD_STEP
            down = loss()
            flat[idx] = orig
            fd = (up - down) / (2 * FD_STEP)
            rel = abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), FD_FLOOR)
            worst = max(worst, rel)
    return worst


def test_gradients_match_finite_differences():
    cfg = ModelConfig(P=3, K=2, T=4, H=6, n_layers=2, dropout_rate=0.0, seed=0)
    assert fd_check(cfg, seed=17) < 1e-4


def test_gradients_match_finite_differences_single_layer():
    cfg = ModelConfig(P=2, K=2, T=3, H=5, n_layers=1, dropout_rate=0.0, seed=0)
    assert fd_check(cfg, seed=23) < 1e-4


def test_gradients_with_fixed_dropout_masks():
    cfg = ModelConfig(P=3, K=2, T=4, H=6, n_layers=2, dropout_rate=0.4, seed=0)
    masks = sample_dropout_masks(cfg, 1, np.random.default_rng(99))
    assert fd_check(cfg, seed=31, masks=masks) < 1e-4


def test_perfect_reconstruction_gives_zero_output_gradients():
    cfg = ModelConfig(P=3, K=2, T=4, H=5, n_layers=2, dropout_rate=0.0, seed=0)
    params = init_params(cfg, np.random.default_rng(4))
    window = np.random.default_rng(5).normal(size=(cfg.T, cfg.P))
    target = reconstruct(params, window)  # residual is exactly zero
    grads = backward(params, window, target)
    for name, g in grads.items():
        assert np.all(g == 0.0), name


def test_clipping_caps_the_global_norm():
    grads = {
        "a": np.full((3, 3), 2.0),
        "b": np.full(4, -1.0),
    }
    before = global_norm(grads)
    returned = clip_gradients(grads, 1.0)
    assert returned == pytest.approx(before)
    assert global_norm(grads) <= 1.0 + 1e-9


def test_clipping_leaves_small_gradients_alone():
    grads = {"a": np.array([0.3, -0.4])}
    clip_gradients(grads, 5.0)
    assert np.array_equal(grads["a"], np.array([0.3, -0.4]))
    clip_gradients(grads, None)
    assert np.array_equal(grads["a"], np.array([0.3, -0.4]))


def test_non_finite_gradients_raise_with_tensor_name():
    cfg = ModelConfig(P=3, K=2, T=4, H=5, n_layers=1, dropout_rate=0.0, seed=0)
    params = init_params(cfg, np.random.default_rng(6))
    params.output_W[0, 0] = np.nan
    window = np.random.default_rng(7).normal(size=(cfg.T, cfg.P))
    with pytest.raises(NumericalError, match="non-finite gradient in"):
        backward(params, window, np.zeros((cfg.T, cfg.K)))
