"""Classifier suite: residual CNN, video/audio transformers, fusion, one-vs-all."""

from .cnn import ResidualCNN, parameter_count
from .config import MODEL_KINDS, TRAIN_PRESETS, CnnConfig, TrainConfig, TransformerConfig, train_preset
from .inference import argmax_label_index, frame_vote, softmax
from .registry import OneVsAll, binary_suite, binary_wrap, build_model, model_fingerprint, model_from_store, relabel
from .store import ParameterStore, load_parameters, save_parameters
from .training import EpochRecord, TrainResult, evaluate, train, write_epoch_log
from .transformer import AudioTransformer, FusionClassifier, VideoTransformer

__all__ = [
    "AudioTransformer",
    "CnnConfig",
    "EpochRecord",
    "FusionClassifier",
    "MODEL_KINDS",
    "OneVsAll",
    "ParameterStore",
    "ResidualCNN",
    "TRAIN_PRESETS",
    "TrainConfig",
    "TrainResult",
    "TransformerConfig",
    "VideoTransformer",
    "argmax_label_index",
    "binary_suite",
    "binary_wrap",
    "build_model",
    "evaluate",
    "frame_vote",
    "load_parameters",
    "model_fingerprint",
    "model_from_store",
    "parameter_count",
    "relabel",
    "save_parameters",
    "softmax",
    "train",
    "train_preset",
    "write_epoch_log",
]
