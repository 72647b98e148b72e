"""Feature fusion and the sigmoid classifier head.

The fused feature is the plain concatenation of the configured encoder
vectors with the metadata vector appended last. Only the head's weights and
bias train; optimization is mini-batch SGD on binary cross-entropy, with the
parameter snapshot scoring the best validation ROC-AUC kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .encoders import EmbeddingVector, EncoderSpec
from .errors import DataError
from .ioutil import atomic_write_bytes
from .metrics import roc_auc
from .preprocess import MetadataVector

BCE_EPS = 1e-12

CHECKPOINT_MAGIC = "RHEAD 1"


class FusionError(DataError):
    """Encoder vectors do not match the fusion configuration."""


class TrainingError(DataError):
    """Training preconditions violated or a checkpoint is malformed."""


@dataclass(frozen=True, eq=False)
class FusedFeature:
    """Concatenated encoder vectors plus metadata; length is fixed per config."""

    values: np.ndarray


@dataclass(eq=False)
class ClassifierHead:
    """Trainable parameters of the sigmoid head."""

    weights: np.ndarray
    bias: float

    def copy(self) -> "ClassifierHead":
        return ClassifierHead(self.weights.copy(), float(self.bias))


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 16
    learning_rate: float = 3e-5
    max_epochs: int = 5
    early_stopping_patience: int = 1
    seed: int = 0
    # The default learning rate suits full-model fine-tuning; with only a
    # linear head training, a much larger rate is usually needed.
    lr_override: float | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise TrainingError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise TrainingError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise TrainingError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.early_stopping_patience < 1:
            raise TrainingError(
                f"early_stopping_patience must be >= 1, got {self.early_stopping_patience}"
            )
        if self.lr_override is not None and self.lr_override <= 0:
            raise TrainingError(f"lr_override must be > 0, got {self.lr_override}")

    @property
    def effective_lr(self) -> float:
        return self.learning_rate if self.lr_override is None else self.lr_override


@dataclass(frozen=True)
class Prediction:
    record_id: str
    probability: float


@dataclass(frozen=True, eq=False)
class TrainResult:
    head: ClassifierHead
    valid_auc: float
    epoch: int  # 1-based epoch of the best snapshot


def fuse(
    embeddings: Sequence[EmbeddingVector],
    metadata: MetadataVector,
    specs: Sequence[EncoderSpec] | None = None,
) -> FusedFeature:
    """Concatenate encoder vectors in configured order, metadata last.

    When ``specs`` is given, encoder names, order, and dimensions are checked
    against it.
    """
    if specs is not None:
        if len(embeddings) != len(specs):
            raise FusionError(f"expected {len(specs)} encoder vectors, got {len(embeddings)}")
        for emb, spec in zip(embeddings, specs):
            if emb.encoder_name != spec.name:
                raise FusionError(f"encoder order mismatch: got {emb.encoder_name!r}, want {spec.name!r}")
            if np.asarray(emb.values).shape != (spec.dim,):
                raise FusionError(
                    f"encoder {spec.name!r}: vector shape {np.asarray(emb.values).shape}, want ({spec.dim},)"
                )
    parts = [np.asarray(e.values, dtype=np.float64).reshape(-1) for e in embeddings]
    parts.append(np.asarray(metadata.values, dtype=np.float64))
    values = np.concatenate(parts)
    if not np.all(np.isfinite(values)):
        raise FusionError("fused feature contains non-finite values")
    return FusedFeature(values)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Branch on sign so exp never overflows.
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict(head: ClassifierHead, features: FusedFeature) -> float:
    """Sigmoid of the affine score; numerically stable at any magnitude."""
    x = np.asarray(features.values, dtype=np.float64)
    if x.shape != head.weights.shape:
        raise FusionError(f"feature dim {x.shape} does not match head dim {head.weights.shape}")
    return float(_sigmoid(np.array([x @ head.weights + head.bias]))[0])


def bce_loss(probability: float, label: int) -> float:
    """Binary cross-entropy with the probability clamped to [eps, 1-eps]."""
    p = min(max(probability, BCE_EPS), 1.0 - BCE_EPS)
    return -(label * math.log(p) + (1 - label) * math.log1p(-p))


def bce_gradient(
    head: ClassifierHead, features: FusedFeature, label: int
) -> tuple[float, np.ndarray, float]:
    """Loss plus its analytic gradient w.r.t. (weights, bias).

    The residual (p - y) is the shared factor: d/dw = (p - y) * x and
    d/db = (p - y).
    """
    p = predict(head, features)
    residual = p - label
    return bce_loss(p, label), residual * np.asarray(features.values, dtype=np.float64), residual


def train_head(
    train_features: np.ndarray,
    train_labels: np.ndarray,
    valid_features: np.ndarray,
    valid_labels: np.ndarray,
    cfg: TrainingConfig,
) -> TrainResult:
    """Mini-batch SGD on BCE, keeping the best-validation-AUC snapshot.

    Shuffling is seeded from cfg.seed, the last partial batch is kept, and
    training stops once validation AUC fails to improve for
    ``early_stopping_patience`` consecutive epochs.
    """
    X = np.asarray(train_features, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.float64)
    Xv = np.asarray(valid_features, dtype=np.float64)
    yv = np.asarray(valid_labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("training set must be a non-empty 2-D feature matrix")
    if Xv.ndim != 2 or Xv.shape[0] == 0:
        raise TrainingError("validation set must be a non-empty 2-D feature matrix")
    if X.shape[0] != y.shape[0] or Xv.shape[0] != yv.shape[0]:
        raise TrainingError("feature/label lengths disagree")
    if Xv.shape[1] != X.shape[1]:
        raise TrainingError(f"validation dim {Xv.shape[1]} does not match training dim {X.shape[1]}")
    if len(np.unique(yv)) < 2:
        raise TrainingError("validation set must contain both classes for ROC-AUC")

    n, dim = X.shape
    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(dim, dtype=np.float64)
    b = 0.0
    lr = cfg.effective_lr

    best = TrainResult(ClassifierHead(w.copy(), b), -math.inf, 0)
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            Xb = X[idx]
            residual = _sigmoid(Xb @ w + b) - y[idx]
            w -= lr * (Xb.T @ residual) / idx.size
            b -= lr * float(residual.mean())
        auc = roc_auc(_sigmoid(Xv @ w + b), yv).auc
        if auc > best.valid_auc:
            best = TrainResult(ClassifierHead(w.copy(), b), auc, epoch)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stopping_patience:
                break
    return best


def save_head(
    path,
    head: ClassifierHead,
    *,
    encoder_names: Sequence[str],
    seed: int,
    epoch: int,
    valid_auc: float,
) -> None:
    """Checkpoint: plain-text header, blank line, then f64 LE weights + bias."""
    header = (
        f"{CHECKPOINT_MAGIC}\n"
        f"dim={head.weights.size}\n"
        f"encoders={','.join(encoder_names)}\n"
        f"seed={seed}\n"
        f"epoch={epoch}\n"
        f"valid_auc={valid_auc:.17g}\n"
        "\n"
    )
    payload = np.concatenate([head.weights, [head.bias]]).astype("<f8").tobytes()
    atomic_write_bytes(path, header.encode("utf-8") + payload)


def load_head(path) -> tuple[ClassifierHead, dict[str, str]]:
    """Read a checkpoint written by save_head; returns the head and header fields."""
    data = open(path, "rb").read()
    sep = data.find(b"\n\n")
    if sep < 0:
        raise TrainingError(f"{path}: malformed checkpoint (no header terminator)")
    lines = data[:sep].decode("utf-8").splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise TrainingError(f"{path}: not a head checkpoint")
    meta = {}
    for line in lines[1:]:
        key, eq, value = line.partition("=")
        if not eq:
            raise TrainingError(f"{path}: bad header line {line!r}")
        meta[key] = value
    try:
        dim = int(meta["dim"])
    except (KeyError, ValueError):
        raise TrainingError(f"{path}: missing or bad dim in header") from None
    payload = data[sep + 2 :]
    if len(payload) != 8 * (dim + 1):
        raise TrainingError(
            f"{path}: payload is {len(payload)} bytes, want {8 * (dim + 1)} for dim {dim}"
        )
    values = np.frombuffer(payload, dtype="<f8")
    return ClassifierHead(values[:dim].copy(), float(values[dim])), meta


def with_seed(cfg: TrainingConfig, seed: int) -> TrainingConfig:
    return replace(cfg, seed=seed)
