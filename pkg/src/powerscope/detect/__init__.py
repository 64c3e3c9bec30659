"""Trainable three-class detectors over power windows."""

from .model_io import load_model, save_model
from .nets import ARCH_NAMES, get_arch, softmax
from .training import (ClassProbs, DetectorConfig, DetectorModel, Metrics,
                       TrainReport, cross_validate, evaluate, forward,
                       gradient_check, train, train_with_val)

__all__ = [
    "ARCH_NAMES", "ClassProbs", "DetectorConfig", "DetectorModel", "Metrics",
    "TrainReport", "cross_validate", "evaluate", "forward", "get_arch",
    "gradient_check", "load_model", "save_model", "softmax", "train",
    "train_with_val",
]
