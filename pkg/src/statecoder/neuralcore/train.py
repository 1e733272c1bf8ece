"""Mini-batch training loop for the sequence auto-encoder.

One seeded generator drives everything in a fixed order -- parameter init,
per-epoch shuffles, dropout masks -- so a (config, data) pair reproduces the
same trained model bit for bit.  After every epoch the training and
validation MSE are measured with dropout disabled.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from ..dataset import WindowSample, stack_windows
from ..errors import DataError, NumericalError, TrainingError, UsageError
from .backprop import _backward_batch, _check_finite, clip_gradients
from .model import (
    AutoencoderParams,
    ModelConfig,
    _forward_batch,
    init_params,
    sample_dropout_masks,
)
from .optim import AdamState, adam_step

__all__ = ["TrainReport", "train", "evaluate_mse", "save_report", "load_report"]


@dataclass
class TrainReport:
    """Per-epoch training curves.

    ``wall_time_s`` is an in-memory runtime diagnostic only: the serialized
    form carries just the MSE curves, so identical runs produce identical
    report files.
    """

    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    wall_time_s: list[float] = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.train_mse)

    def to_json(self) -> dict:
        return {
            "epochs": self.epochs,
            "train_mse": self.train_mse,
            "val_mse": self.val_mse,
        }


def save_report(report: TrainReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")


def load_report(path) -> TrainReport:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid report JSON: {exc}") from exc
    try:
        report = TrainReport(
            train_mse=[float(v) for v in doc["train_mse"]],
            val_mse=[float(v) for v in doc["val_mse"]],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid report JSON: {exc}") from exc
    if len(report.val_mse) != len(report.train_mse):
        raise DataError(f"{path}: curve lengths differ")
    return report


def _validate_inputs(config, windows, output_channels, name):
    if len(output_channels) != config.K:
        raise UsageError(
            f"{len(output_channels)} output channels for K={config.K}"
        )
    if len(set(output_channels)) != len(output_channels):
        raise UsageError("output channels must be distinct")
    for ch in output_channels:
        if not 0 <= ch < config.P:
            raise UsageError(f"output channel {ch} out of range for P={config.P}")
    for w in windows:
        if w.values.shape != (config.T, config.P):
            raise UsageError(
                f"{name} window has shape {w.values.shape}, expected "
                f"({config.T}, {config.P})"
            )


def evaluate_mse(
    params: AutoencoderParams,
    X: np.ndarray,
    output_channels: list[int],
    chunk: int = 512,
) -> float:
    """MSE of the reconstruction over (N, T, P) windows, dropout disabled."""
    if X.shape[0] == 0:
        raise UsageError("cannot evaluate on an empty window set")
    targets = X[:, :, output_channels]
    total = 0.0
    for lo in range(0, X.shape[0], chunk):
        Xb = X[lo : lo + chunk]
        y = _forward_batch(params, Xb).decode.y  # (T, B, K)
        diff = y.transpose(1, 0, 2) - targets[lo : lo + chunk]
        total += float(np.sum(diff * diff))
    return total / targets.size


def train(
    config: ModelConfig,
    train_windows: list[WindowSample],
    val_windows: list[WindowSample],
    output_channels: list[int],
) -> tuple[AutoencoderParams, TrainReport]:
    """Train a fresh model; returns the parameters and per-epoch curves.

    With ``config.epochs == 0`` the initialized parameters come back with an
    empty report.  Divergence (non-finite loss or gradients) raises
    :class:`TrainingError` naming the epoch.
    """
    if not train_windows:
        raise UsageError("training set is empty")
    _validate_inputs(config, train_windows, output_channels, "training")
    _validate_inputs(config, val_windows, output_channels, "validation")
    if config.epochs > 0 and not val_windows:
        raise UsageError("validation set is empty")

    rng = np.random.default_rng(config.seed)
    params = init_params(config, rng)
    report = TrainReport()
    if config.epochs == 0:
        return params, report

    Xtr = stack_windows(train_windows)
    Xval = stack_windows(val_windows)
    targets = Xtr[:, :, output_channels]
    n = Xtr.shape[0]
    state = AdamState.for_tensors(params.tensors())
    use_dropout = config.dropout_rate > 0.0

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            Xb = Xtr[idx]
            masks = (
                sample_dropout_masks(config, len(idx), rng)
                if use_dropout
                else None
            )
            caches = _forward_batch(params, Xb, masks)
            residual = caches.decode.y - targets[idx].transpose(1, 0, 2)
            batch_loss = float(np.mean(residual * residual))
            if not np.isfinite(batch_loss):
                raise TrainingError(f"training diverged at epoch {epoch}")
            dY = (2.0 / residual.size) * residual
            grads = _backward_batch(params, caches, dY, masks)
            try:
                _check_finite(grads)
            except NumericalError as exc:
                raise TrainingError(
                    f"training diverged at epoch {epoch}: {exc}"
                ) from exc
            clip_gradients(grads, config.clip_norm)
            adam_step(state, params, grads, config)
        report.train_mse.append(evaluate_mse(params, Xtr, output_channels))
        report.val_mse.append(evaluate_mse(params, Xval, output_channels))
        report.wall_time_s.append(time.perf_counter() - t0)
    return params, report
