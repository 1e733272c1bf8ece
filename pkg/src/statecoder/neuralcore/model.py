"""Sequence auto-encoder built from multilayer LSTMs.

An encoder stack reads a (T, P) window one step at a time; the final hidden
state of the top layer passes through a dense layer to become the fixed
context vector.  The context initializes every decoder layer's hidden and
cell state (through per-layer dense maps), and the decoder then runs closed
loop: its first input is a zero vector, afterwards each step consumes the
previous step's output.  The output dense layer reconstructs only K selected
channels ("partial reconstruction"), so the context must summarize all P
inputs while the error is measured on the K channels that matter.

Array conventions
-----------------
Weights act on row vectors: z = x @ W.T + h @ U.T + b, so an LSTM layer with
input size D and width H has W: (4H, D), U: (4H, H), b: (4H,).  The four
gate blocks are ordered [input, forget, cell-candidate, output].  Batched
internals are time-major: (T, B, dim).  Everything is float64.

Dropout follows the non-recurrent scheme: when active it multiplies only the
inputs flowing *into* each LSTM layer (window rows into the first encoder
layer, the fed-back output into the first decoder layer, and hidden vectors
between stacked layers) by fresh Bernoulli(1-rate)/(1-rate) masks per step.
Recurrent h->h and c->c paths are never masked.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..dataset import WindowSample
from ..errors import NumericalError, UsageError

__all__ = [
    "ModelConfig",
    "LstmLayerParams",
    "DecoderInitParams",
    "AutoencoderParams",
    "ContextVector",
    "DropoutMasks",
    "reference_config",
    "compression_ratio",
    "init_params",
    "lstm_cell_step",
    "sample_dropout_masks",
    "encode",
    "decode",
    "reconstruct",
    "mse_loss",
]


@dataclass(frozen=True)
class ModelConfig:
    """Hyper-parameters of the auto-encoder and its training run."""

    P: int
    K: int
    T: int
    H: int
    n_layers: int = 3
    dropout_rate: float = 0.4
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0
    clip_norm: float | None = 5.0

    def __post_init__(self):
        if self.P < 1:
            raise UsageError("P must be at least 1")
        if not 1 <= self.K <= self.P:
            raise UsageError("K must satisfy 1 <= K <= P")
        if self.T < 1:
            raise UsageError("T must be at least 1")
        if self.H < 1:
            raise UsageError("H must be at least 1")
        if self.n_layers < 1:
            raise UsageError("n_layers must be at least 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise UsageError("dropout_rate must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise UsageError("learning_rate must be positive")
        if not 0.0 <= self.adam_beta1 < 1.0:
            raise UsageError("adam_beta1 must lie in [0, 1)")
        if not 0.0 <= self.adam_beta2 < 1.0:
            raise UsageError("adam_beta2 must lie in [0, 1)")
        if self.adam_epsilon <= 0:
            raise UsageError("adam_epsilon must be positive")
        if self.batch_size < 1:
            raise UsageError("batch_size must be at least 1")
        if self.epochs < 0:
            raise UsageError("epochs must be non-negative")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise UsageError("clip_norm must be positive (or None to disable)")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown model config keys: {sorted(unknown)}")
        missing = {"P", "K", "T", "H"} - set(doc)
        if missing:
            raise UsageError(f"missing model config keys: {sorted(missing)}")
        return cls(**doc)


def reference_config() -> ModelConfig:
    """Full-scale configuration used on the compressor fleet study."""
    return ModelConfig(P=158, K=6, T=36, H=400, n_layers=3, dropout_rate=0.4)


def compression_ratio(config: ModelConfig) -> float:
    """Input-to-context compression: (P * T) / H."""
    return (config.P * config.T) / config.H


@dataclass
class LstmLayerParams:
    """One LSTM layer; gate blocks stacked [input, forget, cand, output]."""

    W: np.ndarray  # (4H, D) input weights
    U: np.ndarray  # (4H, H) recurrent weights
    b: np.ndarray  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.U.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]


@dataclass
class DecoderInitParams:
    """Dense maps taking the context to one decoder layer's initial h and c."""

    W_h: np.ndarray  # (H, H)
    b_h: np.ndarray  # (H,)
    W_c: np.ndarray  # (H, H)
    b_c: np.ndarray  # (H,)


@dataclass
class AutoencoderParams:
    """All trainable tensors, exposed in a stable declared order."""

    encoder_layers: list[LstmLayerParams]
    context_W: np.ndarray  # (H, H)
    context_b: np.ndarray  # (H,)
    decoder_init: list[DecoderInitParams]
    decoder_layers: list[LstmLayerParams]
    output_W: np.ndarray  # (K, H)
    output_b: np.ndarray  # (K,)

    @property
    def n_layers(self) -> int:
        return len(self.encoder_layers)

    @property
    def hidden_size(self) -> int:
        return self.context_W.shape[0]

    @property
    def input_size(self) -> int:
        return self.encoder_layers[0].input_size

    @property
    def output_size(self) -> int:
        return self.output_W.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        """Named views of every tensor, in the serialization order.

        The returned dict holds the *same* array objects as the dataclass
        fields, so in-place updates through it update the model.
        """
        out: dict[str, np.ndarray] = {}
        for l, layer in enumerate(self.encoder_layers):
            out[f"enc.{l}.W"] = layer.W
            out[f"enc.{l}.U"] = layer.U
            out[f"enc.{l}.b"] = layer.b
        out["ctx.W"] = self.context_W
        out["ctx.b"] = self.context_b
        for l, init in enumerate(self.decoder_init):
            out[f"dec_init.{l}.Wh"] = init.W_h
            out[f"dec_init.{l}.bh"] = init.b_h
            out[f"dec_init.{l}.Wc"] = init.W_c
            out[f"dec_init.{l}.bc"] = init.b_c
        for l, layer in enumerate(self.decoder_layers):
            out[f"dec.{l}.W"] = layer.W
            out[f"dec.{l}.U"] = layer.U
            out[f"dec.{l}.b"] = layer.b
        out["out.W"] = self.output_W
        out["out.b"] = self.output_b
        return out

    def copy(self) -> "AutoencoderParams":
        return AutoencoderParams(
            encoder_layers=[
                LstmLayerParams(l.W.copy(), l.U.copy(), l.b.copy())
                for l in self.encoder_layers
            ],
            context_W=self.context_W.copy(),
            context_b=self.context_b.copy(),
            decoder_init=[
                DecoderInitParams(
                    i.W_h.copy(), i.b_h.copy(), i.W_c.copy(), i.b_c.copy()
                )
                for i in self.decoder_init
            ],
            decoder_layers=[
                LstmLayerParams(l.W.copy(), l.U.copy(), l.b.copy())
                for l in self.decoder_layers
            ],
            output_W=self.output_W.copy(),
            output_b=self.output_b.copy(),
        )


@dataclass(frozen=True)
class ContextVector:
    """Fixed-length summary of one window."""

    values: np.ndarray  # (H,)
    window_start: int

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise UsageError("context values must be a vector")
        if not np.all(np.isfinite(vals)):
            raise NumericalError("non-finite context vector")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass
class DropoutMasks:
    """Pre-sampled inverted-dropout masks, one per layer input per step."""

    enc: list[np.ndarray]  # layer l: (T, B, D_l)
    dec: list[np.ndarray]


def _layer_input_sizes(config: ModelConfig) -> tuple[list[int], list[int]]:
    enc = [config.P] + [config.H] * (config.n_layers - 1)
    dec = [config.K] + [config.H] * (config.n_layers - 1)
    return enc, dec


def sample_dropout_masks(
    config: ModelConfig, batch_size: int, rng: np.random.Generator
) -> DropoutMasks:
    """Draw one full set of masks for a batch (all ones when rate is 0)."""
    q = 1.0 - config.dropout_rate
    enc_dims, dec_dims = _layer_input_sizes(config)

    def draw(dim: int) -> np.ndarray:
        return (rng.random((config.T, batch_size, dim)) < q) / q

    return DropoutMasks(
        enc=[draw(d) for d in enc_dims], dec=[draw(d) for d in dec_dims]
    )


def init_params(config: ModelConfig, rng: np.random.Generator) -> AutoencoderParams:
    """Seeded uniform(-s, s) init with s = 1/sqrt(H); forget-gate bias 1.0.

    Tensors are drawn in the declared order of ``AutoencoderParams.tensors``
    so the same seed always yields the same model bit for bit.
    """
    H = config.H
    s = 1.0 / np.sqrt(H)

    def u(*shape):
        return rng.uniform(-s, s, size=shape)

    def lstm_layer(d_in: int) -> LstmLayerParams:
        layer = LstmLayerParams(W=u(4 * H, d_in), U=u(4 * H, H), b=u(4 * H))
        layer.b[H : 2 * H] = 1.0  # forget gate opens wide at the start
        return layer

    enc_dims, dec_dims = _layer_input_sizes(config)
    encoder = [lstm_layer(d) for d in enc_dims]
    context_W, context_b = u(H, H), u(H)
    decoder_init = [
        DecoderInitParams(W_h=u(H, H), b_h=u(H), W_c=u(H, H), b_c=u(H))
        for _ in range(config.n_layers)
    ]
    decoder = [lstm_layer(d) for d in dec_dims]
    output_W, output_b = u(config.K, H), u(config.K)
    return AutoencoderParams(
        encoder_layers=encoder,
        context_W=context_W,
        context_b=context_b,
        decoder_init=decoder_init,
        decoder_layers=decoder,
        output_W=output_W,
        output_b=output_b,
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form is overflow-safe for large |x|
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def lstm_cell_step(params: LstmLayerParams, x, h_prev, c_prev):
    """One LSTM cell update; accepts vectors or (B, dim) batches.

    i = sig(Wi x + Ui h + bi), f = sig(...), g = tanh(...), o = sig(...)
    c = f * c_prev + i * g,     h = o * tanh(c)
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    H = params.hidden_size
    if x.shape[-1] != params.input_size:
        raise UsageError(
            f"input has width {x.shape[-1]}, layer expects {params.input_size}"
        )
    if h_prev.shape[-1] != H or c_prev.shape[-1] != H:
        raise UsageError(f"state has wrong width, layer expects {H}")
    z = x @ params.W.T + h_prev @ params.U.T + params.b
    i = _sigmoid(z[..., 0 * H : 1 * H])
    f = _sigmoid(z[..., 1 * H : 2 * H])
    g = np.tanh(z[..., 2 * H : 3 * H])
    o = _sigmoid(z[..., 3 * H : 4 * H])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


@dataclass
class _LayerCache:
    """Per-layer forward record needed for exact backpropagation."""

    x: np.ndarray       # (T, B, D) inputs actually fed (post-mask)
    h: np.ndarray       # (T+1, B, H); h[0] is the initial state
    c: np.ndarray       # (T+1, B, H)
    gates: np.ndarray   # (T, B, 4H) post-activation [i, f, g, o]
    tanh_c: np.ndarray  # (T, B, H) tanh of the new cell state


def _run_layer(
    layer: LstmLayerParams, inputs: np.ndarray, h0: np.ndarray, c0: np.ndarray
) -> _LayerCache:
    """Unroll one LSTM layer over time-major inputs (T, B, D)."""
    T, B = inputs.shape[:2]
    H = layer.hidden_size
    h = np.empty((T + 1, B, H))
    c = np.empty((T + 1, B, H))
    gates = np.empty((T, B, 4 * H))
    tanh_c = np.empty((T, B, H))
    h[0], c[0] = h0, c0
    W_T, U_T, b = layer.W.T, layer.U.T, layer.b
    for t in range(T):
        z = inputs[t] @ W_T + h[t] @ U_T + b
        i = _sigmoid(z[:, 0 * H : 1 * H])
        f = _sigmoid(z[:, 1 * H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H : 4 * H])
        gates[t, :, 0 * H : 1 * H] = i
        gates[t, :, 1 * H : 2 * H] = f
        gates[t, :, 2 * H : 3 * H] = g
        gates[t, :, 3 * H : 4 * H] = o
        c[t + 1] = f * c[t] + i * g
        tanh_c[t] = np.tanh(c[t + 1])
        h[t + 1] = o * tanh_c[t]
    return _LayerCache(x=inputs, h=h, c=c, gates=gates, tanh_c=tanh_c)


@dataclass
class _EncodeCache:
    layers: list[_LayerCache]
    ctx_input: np.ndarray  # (B, H) top hidden state at the final step
    ctx: np.ndarray        # (B, H) context vectors


def _encode_batch(
    params: AutoencoderParams,
    X: np.ndarray,
    masks: DropoutMasks | None = None,
) -> _EncodeCache:
    """Encode batch-major windows (B, T, P) into (B, H) contexts."""
    if X.ndim != 3 or X.shape[2] != params.input_size:
        raise UsageError(
            f"windows have shape {X.shape}, expected (B, T, {params.input_size})"
        )
    B = X.shape[0]
    H = params.hidden_size
    inputs = np.ascontiguousarray(X.transpose(1, 0, 2))
    caches: list[_LayerCache] = []
    zeros = np.zeros((B, H))
    for l, layer in enumerate(params.encoder_layers):
        if masks is not None:
            inputs = inputs * masks.enc[l]
        caches.append(_run_layer(layer, inputs, zeros, zeros))
        inputs = caches[-1].h[1:]
    top_h = caches[-1].h[-1]
    ctx = top_h @ params.context_W.T + params.context_b
    return _EncodeCache(layers=caches, ctx_input=top_h, ctx=ctx)


@dataclass
class _DecodeCache:
    layers: list[_LayerCache]
    ctx: np.ndarray  # (B, H)
    y: np.ndarray    # (T, B, K)


def _decode_batch(
    params: AutoencoderParams,
    ctx: np.ndarray,
    T: int,
    masks: DropoutMasks | None = None,
) -> _DecodeCache:
    """Run the closed-loop decoder for T steps from (B, H) contexts."""
    B = ctx.shape[0]
    H = params.hidden_size
    K = params.output_size
    L = params.n_layers
    dec = params.decoder_layers

    h = [np.empty((T + 1, B, H)) for _ in range(L)]
    c = [np.empty((T + 1, B, H)) for _ in range(L)]
    gates = [np.empty((T, B, 4 * H)) for _ in range(L)]
    tanh_c = [np.empty((T, B, H)) for _ in range(L)]
    xs = [np.empty((T, B, dec[l].input_size)) for l in range(L)]
    for l, init in enumerate(params.decoder_init):
        h[l][0] = ctx @ init.W_h.T + init.b_h
        c[l][0] = ctx @ init.W_c.T + init.b_c

    y = np.empty((T, B, K))
    y_prev = np.zeros((B, K))
    out_W_T = params.output_W.T
    for t in range(T):
        inp = y_prev
        for l in range(L):
            if masks is not None:
                inp = inp * masks.dec[l][t]
            xs[l][t] = inp
            z = inp @ dec[l].W.T + h[l][t] @ dec[l].U.T + dec[l].b
            i = _sigmoid(z[:, 0 * H : 1 * H])
            f = _sigmoid(z[:, 1 * H : 2 * H])
            g = np.tanh(z[:, 2 * H : 3 * H])
            o = _sigmoid(z[:, 3 * H : 4 * H])
            gates[l][t, :, 0 * H : 1 * H] = i
            gates[l][t, :, 1 * H : 2 * H] = f
            gates[l][t, :, 2 * H : 3 * H] = g
            gates[l][t, :, 3 * H : 4 * H] = o
            c[l][t + 1] = f * c[l][t] + i * g
            tanh_c[l][t] = np.tanh(c[l][t + 1])
            h[l][t + 1] = o * tanh_c[l][t]
            inp = h[l][t + 1]
        y[t] = inp @ out_W_T + params.output_b
        y_prev = y[t]

    layer_caches = [
        _LayerCache(x=xs[l], h=h[l], c=c[l], gates=gates[l], tanh_c=tanh_c[l])
        for l in range(L)
    ]
    return _DecodeCache(layers=layer_caches, ctx=ctx, y=y)


@dataclass
class _ForwardCache:
    encode: _EncodeCache
    decode: _DecodeCache


def _forward_batch(
    params: AutoencoderParams,
    X: np.ndarray,
    masks: DropoutMasks | None = None,
) -> _ForwardCache:
    enc = _encode_batch(params, X, masks)
    dec = _decode_batch(params, enc.ctx, X.shape[1], masks)
    return _ForwardCache(encode=enc, decode=dec)


def _window_values(window) -> np.ndarray:
    if isinstance(window, WindowSample):
        return window.values
    vals = np.asarray(window, dtype=np.float64)
    if vals.ndim != 2:
        raise UsageError("window must be a (T, P) matrix")
    return vals


def encode(
    params: AutoencoderParams, window, masks: DropoutMasks | None = None
) -> ContextVector:
    """Encode one window into its context vector."""
    vals = _window_values(window)
    cache = _encode_batch(params, vals[None, :, :], masks)
    start = window.start_index if isinstance(window, WindowSample) else 0
    return ContextVector(values=cache.ctx[0], window_start=start)


def decode(params: AutoencoderParams, context, n_steps: int) -> np.ndarray:
    """Decode a context vector into a (n_steps, K) reconstruction."""
    if n_steps < 1:
        raise UsageError("n_steps must be at least 1")
    vals = context.values if isinstance(context, ContextVector) else np.asarray(context)
    if vals.ndim != 1 or vals.shape[0] != params.hidden_size:
        raise UsageError(
            f"context has shape {vals.shape}, expected ({params.hidden_size},)"
        )
    cache = _decode_batch(params, vals[None, :], n_steps)
    return cache.y[:, 0, :]


def reconstruct(params: AutoencoderParams, window) -> np.ndarray:
    """Encode then decode one window; returns the (T, K) reconstruction."""
    vals = _window_values(window)
    ctx = _encode_batch(params, vals[None, :, :]).ctx
    return _decode_batch(params, ctx, vals.shape[0]).y[:, 0, :]


def mse_loss(output: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error over all entries of two equal-shape matrices."""
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise UsageError(
            f"output shape {output.shape} != target shape {target.shape}"
        )
    return float(np.mean((output - target) ** 2))
