"""Recurrent auto-encoder: model, exact gradients, Adam, training, storage."""
from .backprop import backward, clip_gradients, global_norm
from .model import (
    AutoencoderParams,
    ContextVector,
    DecoderInitParams,
    DropoutMasks,
    LstmLayerParams,
    ModelConfig,
    compression_ratio,
    decode,
    encode,
    init_params,
    lstm_cell_step,
    mse_loss,
    reconstruct,
    reference_config,
    sample_dropout_masks,
)
from .optim import AdamState, adam_step
from .serialize import FORMAT_VERSION, load_model, save_model
from .train import TrainReport, evaluate_mse, load_report, save_report, train

__all__ = [
    "AutoencoderParams",
    "ContextVector",
    "DecoderInitParams",
    "DropoutMasks",
    "LstmLayerParams",
    "ModelConfig",
    "AdamState",
    "TrainReport",
    "FORMAT_VERSION",
    "adam_step",
    "backward",
    "clip_gradients",
    "compression_ratio",
    "decode",
    "encode",
    "evaluate_mse",
    "global_norm",
    "init_params",
    "load_model",
    "load_report",
    "lstm_cell_step",
    "mse_loss",
    "reconstruct",
    "reference_config",
    "sample_dropout_masks",
    "save_model",
    "save_report",
    "train",
]
