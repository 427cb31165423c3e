"""Verifier training and scoring service for reasoning paths."""

from .data import (
    DataFormatError,
    Encoded,
    HashTokenizer,
    StepAnnotation,
    TokenizerConfig,
    TrainingExample,
    encode_input,
    load_training_file,
)
from .loss import LossParts, composite_loss
from .model import ModelConfig, ScorerModel, collate, load_model, save_model
from .server import create_app
from .training import TrainerConfig, TrainingDataError, split_by_question, train, voting_accuracy

__version__ = "0.1.0"

__all__ = [
    "DataFormatError",
    "Encoded",
    "HashTokenizer",
    "LossParts",
    "ModelConfig",
    "ScorerModel",
    "StepAnnotation",
    "TokenizerConfig",
    "TrainerConfig",
    "TrainingDataError",
    "TrainingExample",
    "collate",
    "composite_loss",
    "create_app",
    "encode_input",
    "load_model",
    "load_training_file",
    "save_model",
    "split_by_question",
    "train",
    "voting_accuracy",
]
