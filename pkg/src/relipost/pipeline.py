"""End-to-end wiring: records -> metadata + encoder vectors -> fused matrix
-> fold training / ensemble prediction. The CLI is a thin shell over this."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .classifier import Prediction, TrainingConfig, fuse
from .corpus import PostRecord
from .encoders import EmbeddingStore, EncoderSpec, encode_record, read_store
from .ensemble import EnsembleModel, make_folds, predict_ensemble, train_ensemble
from .errors import DataError
from .preprocess import FitScope, ScalerState, build_metadata, fit_scaler, lower_titles


class PipelineError(DataError):
    """Inconsistent pipeline inputs (e.g. unlabeled training data)."""


@dataclass(frozen=True)
class FeatureSet:
    """Fused features aligned with record ids (and labels when present)."""

    ids: tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray | None


def load_stores(
    specs: Sequence[EncoderSpec], store_paths: Mapping[str, str]
) -> dict[str, EmbeddingStore]:
    """Open every file-backed encoder's store, validating dimensions."""
    stores: dict[str, EmbeddingStore] = {}
    for spec in specs:
        if spec.kind != "file":
            continue
        if spec.name not in store_paths:
            raise PipelineError(f"file-backed encoder {spec.name!r} has no store path configured")
        stores[spec.name] = read_store(store_paths[spec.name], expected_dim=spec.dim)
    return stores


def build_features(
    records: Sequence[PostRecord],
    specs: Sequence[EncoderSpec],
    stores: Mapping[str, EmbeddingStore],
    scaler: ScalerState,
    *,
    require_labels: bool = False,
) -> FeatureSet:
    """Lower titles, build metadata, encode, and fuse each record."""
    ids = []
    rows = []
    labels = []
    for record in records:
        # metadata first: the title flag reads the original message, the
        # encoders see the title-lowered form
        metadata = build_metadata(record, scaler)
        lowered = lower_titles(record)
        embeddings = [encode_record(lowered, spec, stores.get(spec.name)) for spec in specs]
        rows.append(fuse(embeddings, metadata, specs).values)
        ids.append(record.id)
        if require_labels:
            if record.label is None:
                raise PipelineError(f"record {record.id!r} has no label")
            labels.append(record.label)
    return FeatureSet(
        ids=tuple(ids),
        features=np.vstack(rows) if rows else np.zeros((0, 0)),
        labels=np.asarray(labels, dtype=np.float64) if require_labels else None,
    )


def train_pipeline(
    train_records: Sequence[PostRecord],
    specs: Sequence[EncoderSpec],
    stores: Mapping[str, EmbeddingStore],
    cfg: TrainingConfig,
    *,
    k: int,
    extra_corpora: Sequence[Sequence[PostRecord]] = (),
    fit_scope: FitScope = FitScope.ALL_SPLITS,
) -> tuple[EnsembleModel, ScalerState]:
    """Fit the scaler, assemble features, and train the k-fold ensemble."""
    scaler = fit_scaler([list(train_records), *map(list, extra_corpora)], fit_scope)
    feats = build_features(train_records, specs, stores, scaler, require_labels=True)
    plan = make_folds(list(feats.ids), k, cfg.seed)
    model = train_ensemble(feats.features, feats.labels, feats.ids, plan, cfg)
    model.specs = tuple(specs)
    return model, scaler


def predict_pipeline(
    records: Sequence[PostRecord],
    model: EnsembleModel,
    scaler: ScalerState,
    stores: Mapping[str, EmbeddingStore],
) -> list[Prediction]:
    """Score records with the ensemble (mean of fold probabilities)."""
    feats = build_features(records, model.specs, stores, scaler)
    probs = predict_ensemble(model, feats.features)
    return [Prediction(rid, float(p)) for rid, p in zip(feats.ids, probs)]
