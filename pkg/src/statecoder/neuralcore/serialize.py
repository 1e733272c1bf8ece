"""Versioned binary container for trained models.

Layout (all integers little-endian):

    bytes 0..7    magic b"STATCODR"
    bytes 8..11   uint32 format version (currently 1)
    bytes 12..15  uint32 header length N
    bytes 16..    N bytes of UTF-8 JSON header
    remainder     raw float64 little-endian tensor data, in header order

The JSON header is ``{"config": {...}, "output_channels": [...],
"tensors": [{"name": ..., "shape": [...]}, ...]}`` with tensors listed in
the declared order of ``AutoencoderParams.tensors``.  Saving the same model
twice produces identical bytes; loading reproduces every tensor bit for bit.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import FormatError, UsageError
from .model import (
    AutoencoderParams,
    DecoderInitParams,
    LstmLayerParams,
    ModelConfig,
)

__all__ = ["save_model", "load_model", "FORMAT_VERSION"]

MAGIC = b"STATCODR"
FORMAT_VERSION = 1


def save_model(
    params: AutoencoderParams,
    config: ModelConfig,
    output_channels: list[int],
    path,
) -> None:
    tensors = params.tensors()
    header = {
        "config": config.to_dict(),
        "output_channels": [int(c) for c in output_channels],
        "tensors": [
            {"name": name, "shape": list(arr.shape)}
            for name, arr in tensors.items()
        ],
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for arr in tensors.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    H, P, K = config.H, config.P, config.K
    shapes: dict[str, tuple[int, ...]] = {}
    for l in range(config.n_layers):
        d = P if l == 0 else H
        shapes[f"enc.{l}.W"] = (4 * H, d)
        shapes[f"enc.{l}.U"] = (4 * H, H)
        shapes[f"enc.{l}.b"] = (4 * H,)
    shapes["ctx.W"] = (H, H)
    shapes["ctx.b"] = (H,)
    for l in range(config.n_layers):
        shapes[f"dec_init.{l}.Wh"] = (H, H)
        shapes[f"dec_init.{l}.bh"] = (H,)
        shapes[f"dec_init.{l}.Wc"] = (H, H)
        shapes[f"dec_init.{l}.bc"] = (H,)
    for l in range(config.n_layers):
        d = K if l == 0 else H
        shapes[f"dec.{l}.W"] = (4 * H, d)
        shapes[f"dec.{l}.U"] = (4 * H, H)
        shapes[f"dec.{l}.b"] = (4 * H,)
    shapes["out.W"] = (K, H)
    shapes["out.b"] = (K,)
    return shapes


def load_model(path) -> tuple[AutoencoderParams, ModelConfig, list[int]]:
    """Load a model container; the inverse of :func:`save_model`."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from exc
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated model file")
    if raw[:8] != MAGIC:
        raise FormatError(f"{path}: not a model file (bad magic)")
    version, header_len = struct.unpack("<II", raw[8:16])
    if version != FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported model format version {version} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    if len(raw) < 16 + header_len:
        raise FormatError(f"{path}: truncated model file")
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        output_channels = [int(c) for c in header["output_channels"]]
        declared = [(t["name"], tuple(t["shape"])) for t in header["tensors"]]
    except FormatError:
        raise
    except Exception as exc:
        raise FormatError(f"{path}: corrupt model header: {exc}") from exc

    expected = _expected_shapes(config)
    if declared != list(expected.items()):
        raise FormatError(f"{path}: tensor table does not match config")
    if len(output_channels) != config.K:
        raise FormatError(
            f"{path}: {len(output_channels)} output channels for K={config.K}"
        )

    data = raw[16 + header_len :]
    need = sum(int(np.prod(s)) for _, s in declared) * 8
    if len(data) != need:
        raise FormatError(
            f"{path}: tensor data has {len(data)} bytes, expected {need}"
        )
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in declared:
        count = int(np.prod(shape))
        arr = np.frombuffer(
            data, dtype="<f8", count=count, offset=offset
        ).reshape(shape)
        arrays[name] = arr.astype(np.float64)  # own, writable copy
        offset += count * 8

    L = config.n_layers
    params = AutoencoderParams(
        encoder_layers=[
            LstmLayerParams(
                W=arrays[f"enc.{l}.W"], U=arrays[f"enc.{l}.U"], b=arrays[f"enc.{l}.b"]
            )
            for l in range(L)
        ],
        context_W=arrays["ctx.W"],
        context_b=arrays["ctx.b"],
        decoder_init=[
            DecoderInitParams(
                W_h=arrays[f"dec_init.{l}.Wh"],
                b_h=arrays[f"dec_init.{l}.bh"],
                W_c=arrays[f"dec_init.{l}.Wc"],
                b_c=arrays[f"dec_init.{l}.bc"],
            )
            for l in range(L)
        ],
        decoder_layers=[
            LstmLayerParams(
                W=arrays[f"dec.{l}.W"], U=arrays[f"dec.{l}.U"], b=arrays[f"dec.{l}.b"]
            )
            for l in range(L)
        ],
        output_W=arrays["out.W"],
        output_b=arrays["out.b"],
    )
    return params, config, output_channels
