"""K-fold cross-validation driver and average-voting prediction merger.

Each fold holds out one slice for validation, trains the head on the rest,
and keeps its best snapshot. Ensemble predictions are the arithmetic mean of
the fold heads' probabilities, preserving the ranking information ROC-AUC
needs (majority voting on thresholded labels would not).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classifier import (
    ClassifierHead,
    TrainingConfig,
    TrainResult,
    _sigmoid,
    load_head,
    save_head,
    train_head,
    with_seed,
)
from .encoders import EncoderSpec
from .errors import DataError
from .ioutil import atomic_write_text
from .preprocess import ScalerState

DEFAULT_K = 12

MANIFEST_MAGIC = "ensemble v1"
MANIFEST_NAME = "manifest.txt"
SCALER_NAME = "scaler.txt"


class FoldError(DataError):
    """Invalid fold plan or a degenerate (single-class) validation fold."""


class EnsembleError(DataError):
    """Malformed ensemble directory or manifest."""


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of record ids to folds; sizes differ by at most one."""

    k: int
    assignments: Mapping[str, int]
    seed: int

    def fold_ids(self, fold: int) -> list[str]:
        return [rid for rid, f in self.assignments.items() if f == fold]


@dataclass(eq=False)
class EnsembleModel:
    """The k best fold heads plus the shared fusion configuration."""

    heads: list[ClassifierHead]
    fold_aucs: list[float]
    fold_epochs: list[int]
    specs: tuple[EncoderSpec, ...]
    seed: int

    @property
    def k(self) -> int:
        return len(self.heads)

    @property
    def fused_dim(self) -> int:
        return int(self.heads[0].weights.size)


def make_folds(ids: Sequence[str], k: int, seed: int) -> FoldPlan:
    """Seeded shuffle then round-robin assignment; deterministic per seed."""
    if k < 2:
        raise FoldError(f"k must be >= 2, got {k}")
    if k > len(ids):
        raise FoldError(f"k={k} exceeds the {len(ids)} available records")
    if len(set(ids)) != len(ids):
        raise FoldError("record ids must be unique")
    perm = np.random.default_rng(seed).permutation(len(ids))
    fold_of = {ids[idx]: j % k for j, idx in enumerate(perm)}
    # keyed in corpus order for stable iteration
    return FoldPlan(k=k, assignments={rid: fold_of[rid] for rid in ids}, seed=seed)


def train_ensemble(
    features: np.ndarray,
    labels: np.ndarray,
    ids: Sequence[str],
    plan: FoldPlan,
    cfg: TrainingConfig,
) -> EnsembleModel:
    """Train one head per fold (fold i validates, the rest train).

    A validation fold with a single class is an error, not a silent skip:
    skipping would change k.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.shape[0] != len(ids) or y.shape[0] != len(ids):
        raise FoldError("features, labels, and ids must align")
    missing = [rid for rid in ids if rid not in plan.assignments]
    if missing:
        raise FoldError(f"fold plan has no assignment for id {missing[0]!r}")

    fold_index = np.array([plan.assignments[rid] for rid in ids])
    results: list[TrainResult] = []
    for fold in range(plan.k):
        valid_mask = fold_index == fold
        if not valid_mask.any():
            raise FoldError(f"fold {fold} is empty")
        if len(np.unique(y[valid_mask])) < 2:
            raise FoldError(f"fold {fold} validation split contains a single class")
        results.append(
            train_head(
                X[~valid_mask],
                y[~valid_mask],
                X[valid_mask],
                y[valid_mask],
                with_seed(cfg, cfg.seed + fold),
            )
        )
    return EnsembleModel(
        heads=[r.head for r in results],
        fold_aucs=[r.valid_auc for r in results],
        fold_epochs=[r.epoch for r in results],
        specs=(),
        seed=cfg.seed,
    )


def predict_ensemble(model: EnsembleModel, features: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the fold heads' probabilities, one row per record."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if X.shape[1] != model.fused_dim:
        raise EnsembleError(f"feature dim {X.shape[1]} does not match model dim {model.fused_dim}")
    probs = np.stack([_sigmoid(X @ h.weights + h.bias) for h in model.heads])
    return probs.mean(axis=0)


def _checkpoint_name(fold: int) -> str:
    return f"fold_{fold:02d}.head"


def save_ensemble(
    model: EnsembleModel,
    out_dir,
    scaler: ScalerState,
    store_paths: Mapping[str, str] | None = None,
) -> None:
    """Write the ensemble directory: one checkpoint per fold, the scaler
    state, and a plain-text manifest tying them together."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fold, head in enumerate(model.heads):
        save_head(
            out / _checkpoint_name(fold),
            head,
            encoder_names=[s.name for s in model.specs],
            seed=model.seed + fold,
            epoch=model.fold_epochs[fold],
            valid_auc=model.fold_aucs[fold],
        )
    atomic_write_text(out / SCALER_NAME, scaler.to_text())

    lines = [
        MANIFEST_MAGIC,
        f"k={model.k}",
        f"seed={model.seed}",
        f"fused_dim={model.fused_dim}",
        f"encoders={';'.join(f'{s.name}:{s.kind}:{s.dim}' for s in model.specs)}",
        f"scaler={SCALER_NAME}",
    ]
    for name, path in sorted((store_paths or {}).items()):
        lines.append(f"store.{name}={path}")
    for fold in range(model.k):
        lines.append(f"fold_{fold:02d}.file={_checkpoint_name(fold)}")
        lines.append(f"fold_{fold:02d}.auc={model.fold_aucs[fold]:.17g}")
    atomic_write_text(out / MANIFEST_NAME, "\n".join(lines) + "\n")


def load_ensemble(model_dir) -> tuple[EnsembleModel, ScalerState, dict[str, str]]:
    """Read an ensemble directory back; returns (model, scaler, store paths)."""
    root = Path(model_dir)
    manifest_path = root / MANIFEST_NAME
    if not root.is_dir() or not manifest_path.exists():
        raise EnsembleError(f"{os.fspath(model_dir)}: not an ensemble directory (no {MANIFEST_NAME})")
    lines = manifest_path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != MANIFEST_MAGIC:
        raise EnsembleError(f"{manifest_path}: unrecognized manifest header")
    fields: dict[str, str] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise EnsembleError(f"{manifest_path}: bad line {line!r}")
        fields[key] = value

    try:
        k = int(fields["k"])
        seed = int(fields["seed"])
        fused_dim = int(fields["fused_dim"])
    except (KeyError, ValueError):
        raise EnsembleError(f"{manifest_path}: missing or bad k/seed/fused_dim") from None

    specs = []
    if fields.get("encoders"):
        for part in fields["encoders"].split(";"):
            try:
                name, kind, dim = part.split(":")
                specs.append(EncoderSpec(name=name, dim=int(dim), kind=kind))
            except ValueError:
                raise EnsembleError(f"{manifest_path}: bad encoder entry {part!r}") from None
    store_paths = {
        key[len("store.") :]: value for key, value in fields.items() if key.startswith("store.")
    }

    heads: list[ClassifierHead] = []
    fold_aucs: list[float] = []
    fold_epochs: list[int] = []
    for fold in range(k):
        file_key = f"fold_{fold:02d}.file"
        if file_key not in fields:
            raise EnsembleError(f"{manifest_path}: missing checkpoint entry for fold {fold}")
        head, meta = load_head(root / fields[file_key])
        if head.weights.size != fused_dim:
            raise EnsembleError(
                f"fold {fold} checkpoint dim {head.weights.size} does not match manifest {fused_dim}"
            )
        heads.append(head)
        fold_aucs.append(float(fields.get(f"fold_{fold:02d}.auc", meta.get("valid_auc", "nan"))))
        fold_epochs.append(int(meta.get("epoch", "0")))

    scaler = ScalerState.from_text((root / fields.get("scaler", SCALER_NAME)).read_text(encoding="utf-8"))
    model = EnsembleModel(
        heads=heads, fold_aucs=fold_aucs, fold_epochs=fold_epochs, specs=tuple(specs), seed=seed
    )
    return model, scaler, store_paths
