"""relipost: reliable/unreliable classification of social-network posts.

Frozen text encoders (feature hashing or precomputed embedding stores) are
fused with six per-post metadata features; a sigmoid head trains per fold
under k-fold cross-validation and predictions are merged by probability
averaging. Evaluation is exact ROC-AUC.
"""

__version__ = "0.1.0"

from .corpus import CorpusStats, PostRecord, compute_stats, load_corpus, write_corpus
from .encoders import EmbeddingStore, EncoderSpec, hash_encode, read_store, write_store
from .classifier import ClassifierHead, Prediction, TrainingConfig, fuse, predict, train_head
from .ensemble import EnsembleModel, FoldPlan, make_folds, predict_ensemble, train_ensemble
from .metrics import EvalResult, roc_auc
from .preprocess import (
    FitScope,
    MetadataVector,
    ScalerState,
    TitleScan,
    apply_scaler,
    build_metadata,
    day_in_year,
    dedup_training,
    detect_title,
    fit_scaler,
)

__all__ = [
    "__version__",
    "CorpusStats",
    "PostRecord",
    "compute_stats",
    "load_corpus",
    "write_corpus",
    "EmbeddingStore",
    "EncoderSpec",
    "hash_encode",
    "read_store",
    "write_store",
    "ClassifierHead",
    "Prediction",
    "TrainingConfig",
    "fuse",
    "predict",
    "train_head",
    "EnsembleModel",
    "FoldPlan",
    "make_folds",
    "predict_ensemble",
    "train_ensemble",
    "EvalResult",
    "roc_auc",
    "FitScope",
    "MetadataVector",
    "ScalerState",
    "TitleScan",
    "apply_scaler",
    "build_metadata",
    "day_in_year",
    "dedup_training",
    "detect_title",
    "fit_scaler",
]
