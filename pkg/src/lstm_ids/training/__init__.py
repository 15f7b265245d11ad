"""Training runs, prediction, evaluation and model files."""

from __future__ import annotations

from lstm_ids.config import preset_config
from lstm_ids.training.model_io import load_model, save_model
from lstm_ids.training.trainer import (
    EpochStats,
    Evaluation,
    Prediction,
    TrainedModel,
    evaluate,
    predict,
    train,
)

__all__ = [
    "EpochStats",
    "Evaluation",
    "Prediction",
    "TrainedModel",
    "evaluate",
    "load_model",
    "predict",
    "preset_config",
    "save_model",
    "train",
]
