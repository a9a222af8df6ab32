"""Minimal sequence-to-sequence regressors with exact, test-verified gradients."""

from .models import (
    GruModel,
    LstmModel,
    ModelConfig,
    RnnSettings,
    Seq2SeqModel,
    TransformerModel,
    TransformerSettings,
    build_model,
)
from .training import (
    Adam,
    Checkpoint,
    TrainConfig,
    load_checkpoint,
    mae_loss,
    predict_dataset,
    train,
)

__all__ = [
    "Adam",
    "Checkpoint",
    "GruModel",
    "LstmModel",
    "ModelConfig",
    "RnnSettings",
    "Seq2SeqModel",
    "TrainConfig",
    "TransformerModel",
    "TransformerSettings",
    "build_model",
    "load_checkpoint",
    "mae_loss",
    "predict_dataset",
    "train",
]
