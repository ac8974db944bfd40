"""Spatio-temporal forgery analysis pipeline.

Thin re-export of the compiled module. Everything heavy lives in C++;
this package only provides the import surface.
"""

from ._stfa import (
    CorpusSpec,
    DataError,
    Detector,
    ModelConfig,
    NumericError,
    TrainConfig,
    TrainOutcome,
    VideoClip,
    auc,
    clip_incoherence,
    clip_mean_abs_diff,
    confusion,
    extract_slice,
    generate_corpus,
    horn_schunck,
    incoherence_score,
    load_corpus,
    load_detector,
    metrics,
    slice_roughness,
    train_detector,
)

__all__ = [
    "CorpusSpec",
    "DataError",
    "Detector",
    "ModelConfig",
    "NumericError",
    "TrainConfig",
    "TrainOutcome",
    "VideoClip",
    "auc",
    "clip_incoherence",
    "clip_mean_abs_diff",
    "confusion",
    "extract_slice",
    "generate_corpus",
    "horn_schunck",
    "incoherence_score",
    "load_corpus",
    "load_detector",
    "metrics",
    "slice_roughness",
    "train_detector",
]
