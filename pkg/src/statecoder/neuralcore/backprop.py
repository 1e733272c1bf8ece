"""Exact gradients for the sequence auto-encoder.

Backpropagation runs through every path the forward pass uses, including the
decoder's closed loop: the gradient of the input fed at step t+1 flows back
into the output produced at step t, on top of that output's own loss term.
Gradients are accumulated over the batch in a fixed order, so results are
reproducible bit for bit.
"""
from __future__ import annotations

import numpy as np

from ..errors import NumericalError, UsageError
from .model import (
    AutoencoderParams,
    DropoutMasks,
    _forward_batch,
    _LayerCache,
    _window_values,
)

__all__ = ["backward", "global_norm", "clip_gradients"]


def _cell_backward(
    layer, cache: _LayerCache, t: int, dh: np.ndarray, dc_in: np.ndarray
):
    """Backward through one cell update at step t.

    Returns (d_preactivation, dh_prev, dc_prev, dx); dx is the gradient with
    respect to the input *as fed* (mask handling is the caller's business).
    """
    H = layer.hidden_size
    g4 = cache.gates[t]
    i = g4[:, 0 * H : 1 * H]
    f = g4[:, 1 * H : 2 * H]
    g = g4[:, 2 * H : 3 * H]
    o = g4[:, 3 * H : 4 * H]
    tanh_c = cache.tanh_c[t]
    c_prev = cache.c[t]

    do = dh * tanh_c
    dc = dc_in + dh * o * (1.0 - tanh_c**2)
    d_pre = np.empty_like(g4)
    d_pre[:, 0 * H : 1 * H] = dc * g * i * (1.0 - i)        # input gate
    d_pre[:, 1 * H : 2 * H] = dc * c_prev * f * (1.0 - f)   # forget gate
    d_pre[:, 2 * H : 3 * H] = dc * i * (1.0 - g**2)         # candidate
    d_pre[:, 3 * H : 4 * H] = do * o * (1.0 - o)            # output gate

    dh_prev = d_pre @ layer.U
    dc_prev = dc * f
    dx = d_pre @ layer.W
    return d_pre, dh_prev, dc_prev, dx


def _backward_batch(
    params: AutoencoderParams,
    caches,
    dY: np.ndarray,
    masks: DropoutMasks | None = None,
) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss with dL/dy == dY (time-major (T, B, K))."""
    enc_cache = caches.encode
    dec_cache = caches.decode
    T, B, _ = dY.shape
    L = params.n_layers
    H = params.hidden_size
    K = params.output_size
    grads = {name: np.zeros_like(arr) for name, arr in params.tensors().items()}

    # ---- decoder, backwards in time with the feedback path ----
    dh_carry = [np.zeros((B, H)) for _ in range(L)]
    dc_carry = [np.zeros((B, H)) for _ in range(L)]
    dy_feedback = np.zeros((B, K))
    for t in reversed(range(T)):
        dy = dY[t] + dy_feedback
        h_top = dec_cache.layers[L - 1].h[t + 1]
        grads["out.W"] += dy.T @ h_top
        grads["out.b"] += dy.sum(axis=0)
        dx_down = dy @ params.output_W
        for l in reversed(range(L)):
            cache = dec_cache.layers[l]
            layer = params.decoder_layers[l]
            dh = dh_carry[l] + dx_down
            d_pre, dh_prev, dc_prev, dx = _cell_backward(
                layer, cache, t, dh, dc_carry[l]
            )
            grads[f"dec.{l}.W"] += d_pre.T @ cache.x[t]
            grads[f"dec.{l}.U"] += d_pre.T @ cache.h[t]
            grads[f"dec.{l}.b"] += d_pre.sum(axis=0)
            dh_carry[l] = dh_prev
            dc_carry[l] = dc_prev
            if masks is not None:
                dx = dx * masks.dec[l][t]
            dx_down = dx
        if t > 0:
            dy_feedback = dx_down  # closes the loop into y_{t-1}
        # at t == 0 the decoder input was a constant zero vector

    # ---- context -> decoder initial states ----
    ctx = dec_cache.ctx
    dctx = np.zeros((B, H))
    for l in range(L):
        init = params.decoder_init[l]
        dh0, dc0 = dh_carry[l], dc_carry[l]
        grads[f"dec_init.{l}.Wh"] += dh0.T @ ctx
        grads[f"dec_init.{l}.bh"] += dh0.sum(axis=0)
        grads[f"dec_init.{l}.Wc"] += dc0.T @ ctx
        grads[f"dec_init.{l}.bc"] += dc0.sum(axis=0)
        dctx += dh0 @ init.W_h + dc0 @ init.W_c

    # ---- context dense ----
    grads["ctx.W"] += dctx.T @ enc_cache.ctx_input
    grads["ctx.b"] += dctx.sum(axis=0)
    d_top_last = dctx @ params.context_W

    # ---- encoder, backwards in time ----
    dh_carry = [np.zeros((B, H)) for _ in range(L)]
    dc_carry = [np.zeros((B, H)) for _ in range(L)]
    dh_carry[L - 1] = d_top_last  # context reads the top h at the final step
    for t in reversed(range(T)):
        dx_down = None
        for l in reversed(range(L)):
            cache = enc_cache.layers[l]
            layer = params.encoder_layers[l]
            dh = dh_carry[l] if dx_down is None else dh_carry[l] + dx_down
            d_pre, dh_prev, dc_prev, dx = _cell_backward(
                layer, cache, t, dh, dc_carry[l]
            )
            grads[f"enc.{l}.W"] += d_pre.T @ cache.x[t]
            grads[f"enc.{l}.U"] += d_pre.T @ cache.h[t]
            grads[f"enc.{l}.b"] += d_pre.sum(axis=0)
            dh_carry[l] = dh_prev
            dc_carry[l] = dc_prev
            if masks is not None:
                dx = dx * masks.enc[l][t]
            dx_down = dx
        # dx_down now holds the gradient on the input window; not needed

    return grads


def _check_finite(grads: dict[str, np.ndarray]) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in {name}")


def global_norm(grads: dict[str, np.ndarray]) -> float:
    """Euclidean norm of all gradients stacked into one vector."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_gradients(
    grads: dict[str, np.ndarray], clip_norm: float | None
) -> float:
    """Scale gradients in place so their global norm is at most clip_norm.

    Returns the pre-clip global norm.
    """
    norm = global_norm(grads)
    if clip_norm is not None and norm > clip_norm:
        scale = clip_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def backward(
    params: AutoencoderParams,
    window,
    target: np.ndarray,
    masks: DropoutMasks | None = None,
    clip_norm: float | None = None,
) -> dict[str, np.ndarray]:
    """Exact gradients of ``mse_loss(forward(window), target)`` for one window.

    Returns a dict keyed like ``params.tensors()`` with matching shapes.
    Optional global-norm clipping is applied afterwards; non-finite gradients
    raise :class:`NumericalError` naming the offending tensor.
    """
    vals = _window_values(window)
    target = np.asarray(target, dtype=np.float64)
    T = vals.shape[0]
    if target.shape != (T, params.output_size):
        raise UsageError(
            f"target shape {target.shape}, expected ({T}, {params.output_size})"
        )
    caches = _forward_batch(params, vals[None, :, :], masks)
    residual = caches.decode.y[:, 0, :] - target  # (T, K)
    dY = (2.0 / residual.size) * residual[:, None, :]
    grads = _backward_batch(params, caches, dY, masks)
    _check_finite(grads)
    clip_gradients(grads, clip_norm)
    return grads
