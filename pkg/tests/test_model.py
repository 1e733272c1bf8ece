"""Auto-encoder forward pass: config, init, encode/decode oracles."""
import numpy as np
import pytest

from statecoder import neuralcore
from statecoder.errors import NumericalError, UsageError
from statecoder.neuralcore import (
    ModelConfig,
    compression_ratio,
    decode,
    encode,
    init_params,
    mse_loss,
    reconstruct,
    reference_config,
)
from statecoder.neuralcore.model import (
    ContextVector,
    lstm_cell_step,
    sample_dropout_masks,
)


def tiny_config(**overrides):
    kwargs = dict(P=3, K=2, T=4, H=5, n_layers=2, dropout_rate=0.0, seed=0)
    kwargs.update(overrides)
    return ModelConfig(**kwargs)


def zeroed(params):
    for arr in params.tensors().values():
        arr[:] = 0.0
    return params


# -- config -----------------------------------------------------------------


def test_reference_config_matches_deployment_shape():
    cfg = reference_config()
    assert (cfg.P, cfg.K, cfg.T, cfg.H) == (158, 6, 36, 400)
    assert cfg.n_layers == 3
    assert cfg.dropout_rate == 0.4


def test_compression_ratio_values():
    assert abs(compression_ratio(reference_config()) - 14.22) < 0.005
    assert compression_ratio(tiny_config(P=20, K=2, T=20, H=32)) == 12.5
    assert compression_ratio(tiny_config(P=1, K=1, T=5, H=5)) == 1.0


def test_config_rejects_more_outputs_than_inputs():
    with pytest.raises(UsageError):
        tiny_config(P=2, K=3)


def test_config_rejects_bad_dropout():
    with pytest.raises(UsageError):
        tiny_config(dropout_rate=1.0)
    with pytest.raises(UsageError):
        tiny_config(dropout_rate=-0.1)


def test_config_dict_round_trip():
    cfg = tiny_config(dropout_rate=0.25, clip_norm=None)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_config_from_dict_rejects_unknown_keys():
    doc = tiny_config().to_dict()
    doc["momentum"] = 0.9
    with pytest.raises(UsageError, match="momentum"):
        ModelConfig.from_dict(doc)


# -- initialization ---------------------------------------------------------


def test_init_is_uniform_within_scale_with_forget_bias_one():
    cfg = tiny_config(H=16)
    params = init_params(cfg, np.random.default_rng(0))
    s = 1.0 / np.sqrt(cfg.H)
    H = cfg.H
    for name, arr in params.tensors().items():
        if name.endswith(".b") and not name.startswith(("ctx", "out")):
            assert np.all(arr[H:2 * H] == 1.0), name  # forget-gate slice
            rest = np.concatenate([arr[:H], arr[2 * H:]])
            assert np.all(np.abs(rest) < s), name
        else:
            assert np.all(np.abs(arr) < s), name


def test_init_is_seed_deterministic():
    cfg = tiny_config()
    a = init_params(cfg, np.random.default_rng(3))
    b = init_params(cfg, np.random.default_rng(3))
    c = init_params(cfg, np.random.default_rng(4))
    for (n, x), y in zip(a.tensors().items(), b.tensors().values()):
        assert np.array_equal(x, y), n
    assert any(
        not np.array_equal(x, y)
        for x, y in zip(a.tensors().values(), c.tensors().values())
    )


def test_tensor_order_is_stable():
    cfg = tiny_config(n_layers=2)
    names = list(init_params(cfg, np.random.default_rng(0)).tensors())
    assert names[0] == "enc.0.W"
    assert names[-1] == "out.b"
    assert "ctx.W" in names and "dec_init.1.Wc" in names and "dec.1.U" in names


# -- encode -----------------------------------------------------------------


def test_zero_params_encode_to_context_bias():
    cfg = tiny_config()
    params = zeroed(init_params(cfg, np.random.default_rng(0)))
    params.context_b[:] = 7.5
    ctx = encode(params, np.ones((cfg.T, cfg.P)))
    assert np.all(ctx.values == 7.5)


def test_encode_matches_cell_step_composition():
    # oracle: drive the stacked encoder by hand with lstm_cell_step
    cfg = tiny_config(P=3, K=2, T=6, H=4, n_layers=3)
    params = init_params(cfg, np.random.default_rng(9))
    window = np.random.default_rng(10).normal(size=(cfg.T, cfg.P))

    inputs = [row for row in window]
    for layer in params.encoder_layers:
        h = np.zeros(cfg.H)
        c = np.zeros(cfg.H)
        outs = []
        for x in inputs:
            h, c = lstm_cell_step(layer, x, h, c)
            outs.append(h)
        inputs = outs
    want = params.context_W @ inputs[-1] + params.context_b

    got = encode(params, window)
    assert np.allclose(got.values, want, atol=1e-12)
    assert got.window_start == 0


def test_encode_keeps_window_start():
    from statecoder.dataset import WindowSample

    cfg = tiny_config()
    params = init_params(cfg, np.random.default_rng(0))
    window = WindowSample(
        values=np.zeros((cfg.T, cfg.P)), start_index=41
    )
    assert encode(params, window).window_start == 41


def test_context_vector_rejects_non_finite():
    with pytest.raises(NumericalError):
        ContextVector(values=np.array([1.0, np.nan]), window_start=0)


# -- decode -----------------------------------------------------------------


def test_zero_params_decode_to_output_bias():
    cfg = tiny_config()
    params = zeroed(init_params(cfg, np.random.default_rng(0)))
    params.output_b[:] = np.array([1.5, -2.0])
    out = decode(params, np.zeros(cfg.H), n_steps=cfg.T)
    assert out.shape == (cfg.T, cfg.K)
    assert np.all(out == np.array([1.5, -2.0]))


def test_decode_matches_closed_loop_oracle():
    # oracle: unroll the decoder by hand, feeding back its own outputs
    cfg = tiny_config(P=3, K=2, T=5, H=4, n_layers=2)
    params = init_params(cfg, np.random.default_rng(13))
    ctx = np.random.default_rng(14).normal(size=cfg.H)

    h = [init.W_h @ ctx + init.b_h for init in params.decoder_init]
    c = [init.W_c @ ctx + init.b_c for init in params.decoder_init]
    y_prev = np.zeros(cfg.K)
    want = []
    for _ in range(cfg.T):
        inp = y_prev
        for l, layer in enumerate(params.decoder_layers):
            h[l], c[l] = lstm_cell_step(layer, inp, h[l], c[l])
            inp = h[l]
        y_prev = params.output_W @ inp + params.output_b
        want.append(y_prev)

    got = decode(params, ctx, n_steps=cfg.T)
    assert np.allclose(got, np.array(want), atol=1e-12)


def test_decode_accepts_context_vector_and_checks_width():
    cfg = tiny_config()
    params = init_params(cfg, np.random.default_rng(0))
    ctx = ContextVector(values=np.zeros(cfg.H), window_start=3)
    assert decode(params, ctx, 4).shape == (4, cfg.K)
    with pytest.raises(UsageError):
        decode(params, np.zeros(cfg.H + 1), 4)
    with pytest.raises(UsageError):
        decode(params, np.zeros(cfg.H), 0)


def test_reconstruct_shape_contract():
    for P, K in ((3, 3), (4, 1), (6, 4)):
        cfg = tiny_config(P=P, K=K, T=5, H=6)
        params = init_params(cfg, np.random.default_rng(P))
        out = reconstruct(params, np.zeros((cfg.T, P)))
        assert out.shape == (cfg.T, K)


# -- dropout ----------------------------------------------------------------


def test_rate_zero_masks_are_exactly_one():
    cfg = tiny_config(dropout_rate=0.0)
    masks = sample_dropout_masks(cfg, 2, np.random.default_rng(0))
    for m in masks.enc + masks.dec:
        assert np.all(m == 1.0)


def test_rate_zero_masks_do_not_change_the_forward_pass():
    cfg = tiny_config(dropout_rate=0.0)
    params = init_params(cfg, np.random.default_rng(1))
    window = np.random.default_rng(2).normal(size=(cfg.T, cfg.P))
    masks = sample_dropout_masks(cfg, 1, np.random.default_rng(3))
    plain = encode(params, window).values
    masked = encode(params, window, masks=masks).values
    assert np.array_equal(plain, masked)


def test_inference_is_bitwise_repeatable():
    cfg = tiny_config()
    params = init_params(cfg, np.random.default_rng(5))
    window = np.random.default_rng(6).normal(size=(cfg.T, cfg.P))
    assert np.array_equal(
        reconstruct(params, window), reconstruct(params, window)
    )


def test_dropout_masks_scale_by_keep_probability():
    cfg = tiny_config(dropout_rate=0.4, T=50, P=10, K=3, H=8)
    masks = sample_dropout_masks(cfg, 20, np.random.default_rng(7))
    values = np.concatenate([m.ravel() for m in masks.enc + masks.dec])
    kept = values[values != 0.0]
    assert set(np.unique(values)) == {0.0, 1.0 / 0.6}
    assert abs(kept.size / values.size - 0.6) < 0.01


# -- loss -------------------------------------------------------------------


def test_mse_matches_double_loop_oracle():
    rng = np.random.default_rng(8)
    out, tgt = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
    total = 0.0
    for i in range(6):
        for j in range(3):
            total += (out[i, j] - tgt[i, j]) ** 2
    assert abs(mse_loss(out, tgt) - total / 18.0) < 1e-12


def test_mse_rejects_shape_mismatch():
    with pytest.raises(UsageError):
        mse_loss(np.zeros((3, 2)), np.zeros((2, 3)))
