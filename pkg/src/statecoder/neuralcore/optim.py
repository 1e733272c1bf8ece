"""Adam optimizer over named tensor collections.

Standard update with bias correction:

    m <- b1*m + (1-b1)*g          mhat = m / (1 - b1^t)
    v <- b2*v + (1-b2)*g^2        vhat = v / (1 - b2^t)
    theta <- theta - lr * mhat / (sqrt(vhat) + eps)

On the very first step this reduces to theta -= lr * g / (|g| + eps).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError
from .model import AutoencoderParams, ModelConfig

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_tensors(cls, tensors: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in tensors.items()},
            v={k: np.zeros_like(a) for k, a in tensors.items()},
        )


def _as_tensors(params) -> dict[str, np.ndarray]:
    if isinstance(params, AutoencoderParams):
        return params.tensors()
    return params


def adam_step(state: AdamState, params, grads: dict[str, np.ndarray], config: ModelConfig):
    """Apply one Adam update in place; returns (params, state).

    *params* may be an :class:`AutoencoderParams` or any dict of named
    arrays; *grads* must carry the same names and shapes.
    """
    tensors = _as_tensors(params)
    if set(tensors) != set(grads):
        raise UsageError("gradient names do not match parameter names")
    b1, b2 = config.adam_beta1, config.adam_beta2
    lr, eps = config.learning_rate, config.adam_epsilon
    state.t += 1
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, theta in tensors.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise UsageError(f"gradient {name} has shape {g.shape}, "
                             f"parameter has {theta.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        theta -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state
