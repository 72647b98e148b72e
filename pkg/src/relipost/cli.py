"""Command-line entry point.

Subcommands: stats, preprocess, encode, train, predict, evaluate, synth.
Options resolve as flag > config file > built-in default; config files are
line-oriented ``key=value`` with ``#`` comments, keys matching the long flag
names. Exit codes: 0 success, 1 usage, 2 data error, 3 internal.
"""

from __future__ import annotations

import argparse
import platform
import sys
import traceback
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .classifier import TrainingConfig
from .corpus import (
    ATTRIBUTES,
    CorpusError,
    CorpusStats,
    compute_stats,
    load_corpus,
    write_corpus,
)
from .encoders import (
    DEFAULT_DIM,
    DEFAULT_MAX_TOKENS,
    EmbeddingStore,
    EncoderSpec,
    StoreDimError,
    hash_encode,
    read_store,
    write_store,
)
from .ensemble import DEFAULT_K, load_ensemble, save_ensemble
from .errors import DataError, RelipostError, UsageError
from .ioutil import atomic_write_text
from .metrics import roc_auc
from .pipeline import load_stores, predict_pipeline, train_pipeline
from .preprocess import (
    FitScope,
    build_metadata,
    dedup_training,
    fit_scaler,
    lower_titles,
)
from .synth import generate_corpus

_DELIMITERS = {"comma": ",", ",": ",", "tab": "\t", "\t": "\t"}

_STATS_FIELDS = (
    ("n_examples", "examples"),
    ("avg_message_length", "avg message length"),
    ("n_with_images", "posts with images"),
    ("n_duplicated_posts", "duplicated posts"),
    ("n_duplicated_users", "duplicated users"),
)


# ---------------------------------------------------------------------------
# configuration resolution


def _load_config(path: str) -> dict[str, list[str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    values: dict[str, list[str]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise UsageError(f"{path} line {line_no}: expected key=value, got {line!r}")
        values.setdefault(key.strip().replace("-", "_"), []).append(value.strip())
    return values


class Settings:
    """Merged view of CLI flags and the optional config file."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = _load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, key: str, default=None, cast=str):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.config:
            raw = self.config[key][-1]
            try:
                return cast(raw)
            except ValueError:
                raise UsageError(f"config key {key}: bad value {raw!r}") from None
        return default

    def get_list(self, key: str) -> list[str]:
        value = getattr(self.args, key, None)
        if value:
            return list(value)
        return list(self.config.get(key, []))

    def get_bool(self, key: str, default: bool) -> bool:
        value = getattr(self.args, key, None)
        if value is not None:
            return bool(value)
        if key in self.config:
            raw = self.config[key][-1].lower()
            if raw in ("true", "1", "yes"):
                return True
            if raw in ("false", "0", "no"):
                return False
            raise UsageError(f"config key {key}: expected true/false, got {raw!r}")
        return default

    def delimiter(self) -> str:
        raw = self.get("delimiter", "comma")
        if raw not in _DELIMITERS:
            raise UsageError(f"delimiter must be comma or tab, got {raw!r}")
        return _DELIMITERS[raw]

    def schema(self) -> dict[str, str]:
        mapping = {}
        for attr in ATTRIBUTES:
            value = self.get(f"col_{attr}")
            if value is not None:
                mapping[attr] = value
        return mapping

    def fit_scope(self) -> FitScope:
        raw = self.get("fit_scope", "all")
        try:
            return FitScope(raw)
        except ValueError:
            raise UsageError(f"fit-scope must be all or train, got {raw!r}") from None


def _parse_encoder(text: str) -> tuple[str, str, int | None]:
    parts = text.split(":")
    if not parts[0]:
        raise UsageError(f"bad encoder spec {text!r}: empty name")
    name = parts[0]
    kind = parts[1] if len(parts) > 1 and parts[1] else "hashing"
    if kind not in ("hashing", "file"):
        raise UsageError(f"bad encoder spec {text!r}: kind must be hashing or file")
    dim: int | None = None
    if len(parts) > 2 and parts[2]:
        try:
            dim = int(parts[2])
        except ValueError:
            raise UsageError(f"bad encoder spec {text!r}: dim must be an integer") from None
    if len(parts) > 3:
        raise UsageError(f"bad encoder spec {text!r}: expected name[:kind[:dim]]")
    return name, kind, dim


def _parse_store_flags(entries: Sequence[str]) -> dict[str, str]:
    paths = {}
    for entry in entries:
        name, eq, path = entry.partition("=")
        if not eq or not name or not path:
            raise UsageError(f"bad store mapping {entry!r}: expected name=path")
        paths[name] = path
    return paths


def _resolve_encoders(
    settings: Settings,
) -> tuple[list[EncoderSpec], dict[str, EmbeddingStore], dict[str, str]]:
    """Turn encoder/store flags into specs and opened stores.

    File-backed encoders take their dimension from the store header unless
    declared explicitly, in which case the two must agree.
    """
    entries = settings.get_list("encoder") or ["hash:hashing"]
    store_paths = _parse_store_flags(settings.get_list("store"))
    specs: list[EncoderSpec] = []
    stores: dict[str, EmbeddingStore] = {}
    for entry in entries:
        name, kind, dim = _parse_encoder(entry)
        if any(s.name == name for s in specs):
            raise UsageError(f"duplicate encoder name {name!r}")
        if kind == "hashing":
            specs.append(EncoderSpec(name, dim or DEFAULT_DIM, "hashing"))
            continue
        if name not in store_paths:
            raise UsageError(f"file-backed encoder {name!r} needs --store {name}=<path>")
        store = read_store(store_paths[name])
        if dim is not None and store.dim != dim:
            raise StoreDimError(
                f"encoder {name!r} declared dim {dim} but store {store_paths[name]} has dim {store.dim}"
            )
        stores[name] = store
        specs.append(EncoderSpec(name, store.dim, "file"))
    return specs, stores, store_paths


def _training_config(settings: Settings) -> TrainingConfig:
    return TrainingConfig(
        batch_size=settings.get("batch_size", 16, int),
        learning_rate=settings.get("learning_rate", 3e-5, float),
        max_epochs=settings.get("max_epochs", 5, int),
        early_stopping_patience=settings.get("patience", 1, int),
        seed=settings.get("seed", 0, int),
        lr_override=settings.get("lr_override", None, float),
    )


def _write_run_manifest(path, command: str, settings: Mapping[str, object]) -> None:
    lines = [
        f"command={command}",
        f"relipost_version={__version__}",
        f"python_version={platform.python_version()}",
        f"numpy_version={np.__version__}",
        f"created_utc={datetime.now(timezone.utc).isoformat()}",
    ]
    lines.extend(f"{key}={settings[key]}" for key in sorted(settings))
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def _format_stats_table(stats: CorpusStats) -> str:
    rows = []
    for field, label in _STATS_FIELDS:
        value = getattr(stats, field)
        rendered = f"{value:.2f}" if isinstance(value, float) else str(value)
        rows.append((label, rendered))
    width = max(len(label) for label, _ in rows)
    value_width = max(len(v) for _, v in rows)
    return "\n".join(f"{label:<{width}}  {value:>{value_width}}" for label, value in rows)


def _format_stats_kv(stats: CorpusStats) -> str:
    lines = []
    for field, _ in _STATS_FIELDS:
        value = getattr(stats, field)
        lines.append(f"{field}={value:.17g}" if isinstance(value, float) else f"{field}={value}")
    return "\n".join(lines) + "\n"


def cmd_stats(args: argparse.Namespace) -> int:
    settings = Settings(args)
    corpus = load_corpus(args.file, settings.schema(), delimiter=settings.delimiter())
    stats = compute_stats(corpus)
    print(_format_stats_table(stats))
    print()
    print(_format_stats_kv(stats), end="")
    if args.report:
        from . import report

        report_dir = Path(args.report)
        report_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(report_dir / "stats.txt", _format_stats_kv(stats))
        report.save_message_length_histogram(
            [len(r.post_message) for r in corpus], report_dir / "message_length_hist.png"
        )
        _write_run_manifest(report_dir / "run_manifest.txt", "stats", {"file": args.file})
        print(f"report written to {report_dir}", file=sys.stderr)
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    settings = Settings(args)
    delimiter = settings.delimiter()
    schema = settings.schema()
    labeled = settings.get_bool("labeled", True)
    corpus = load_corpus(args.corpus, schema, has_labels=labeled, delimiter=delimiter)

    removed = 0
    if labeled and settings.get_bool("dedup", True):
        corpus, removed = dedup_training(corpus)

    extras = [
        load_corpus(path, schema, delimiter=delimiter)
        for path in settings.get_list("extra_corpus")
    ]
    scaler = fit_scaler([corpus, *extras], settings.fit_scope())

    # Metadata reflects the original messages; the written corpus carries the
    # title-lowered form, so the flag must be captured before lowering.
    metadata_rows = [build_metadata(r, scaler) for r in corpus]
    lowered = [lower_titles(r) for r in corpus]
    meta_columns = {
        f"meta_{name}": [f"{m.values[i]:.17g}" for m in metadata_rows]
        for i, name in enumerate(
            ("num_like", "num_comment", "num_share", "has_images", "has_title", "day_in_year")
        )
    }
    write_corpus(lowered, args.out_corpus, delimiter=delimiter, extra_columns=meta_columns)
    atomic_write_text(args.out_scaler, scaler.to_text())
    _write_run_manifest(
        f"{args.out_corpus}.manifest.txt",
        "preprocess",
        {
            "corpus": args.corpus,
            "out_corpus": args.out_corpus,
            "out_scaler": args.out_scaler,
            "records": len(corpus),
            "duplicates_removed": removed,
            "fit_scope": settings.fit_scope().value,
        },
    )
    print(f"kept {len(corpus)} records ({removed} duplicates removed)")
    for attr, sc in scaler.attributes.items():
        print(f"{attr}: mean={sc.mean:.6g} min={sc.min:.6g} max={sc.max:.6g}")
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    settings = Settings(args)
    corpus = load_corpus(args.corpus, settings.schema(), delimiter=settings.delimiter())
    dim = settings.get("dim", DEFAULT_DIM, int)
    max_tokens = settings.get("max_tokens", DEFAULT_MAX_TOKENS, int)
    name = settings.get("name", "hashing")
    store = EmbeddingStore(name, dim)
    for record in corpus:
        store.add(record.id, hash_encode(record.post_message, dim, max_tokens).values)
    write_store(store, args.out)
    _write_run_manifest(
        f"{args.out}.manifest.txt",
        "encode",
        {"corpus": args.corpus, "out": args.out, "dim": dim, "max_tokens": max_tokens, "name": name},
    )
    print(f"wrote store {name!r}: {len(store)} vectors of dim {dim} -> {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    settings = Settings(args)
    delimiter = settings.delimiter()
    schema = settings.schema()
    corpus = load_corpus(args.corpus, schema, has_labels=True, delimiter=delimiter)
    removed = 0
    if settings.get_bool("dedup", True):
        corpus, removed = dedup_training(corpus)
    extras = [
        load_corpus(path, schema, delimiter=delimiter)
        for path in settings.get_list("extra_corpus")
    ]

    specs, stores, store_paths = _resolve_encoders(settings)
    cfg = _training_config(settings)
    k = settings.get("k", DEFAULT_K, int)

    model, scaler = train_pipeline(
        corpus,
        specs,
        stores,
        cfg,
        k=k,
        extra_corpora=extras,
        fit_scope=settings.fit_scope(),
    )

    out_dir = Path(args.out_dir)
    save_ensemble(model, out_dir, scaler, store_paths)
    if settings.get_bool("figures", True):
        from . import report

        report.save_fold_auc_chart(model.fold_aucs, out_dir / "fold_auc.png")
    _write_run_manifest(
        out_dir / "run_manifest.txt",
        "train",
        {
            "corpus": args.corpus,
            "records": len(corpus),
            "duplicates_removed": removed,
            "k": k,
            "seed": cfg.seed,
            "batch_size": cfg.batch_size,
            "learning_rate": f"{cfg.learning_rate:.17g}",
            "lr_override": "" if cfg.lr_override is None else f"{cfg.lr_override:.17g}",
            "max_epochs": cfg.max_epochs,
            "patience": cfg.early_stopping_patience,
            "encoders": ";".join(f"{s.name}:{s.kind}:{s.dim}" for s in specs),
            "fit_scope": settings.fit_scope().value,
        },
    )

    for fold, auc in enumerate(model.fold_aucs):
        print(f"fold {fold:2d}: valid ROC-AUC {auc:.4f} (epoch {model.fold_epochs[fold]})")
    print(f"mean fold ROC-AUC {float(np.mean(model.fold_aucs)):.4f}")
    print(f"ensemble written to {out_dir}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    settings = Settings(args)
    model, scaler, manifest_stores = load_ensemble(args.model)
    store_paths = dict(manifest_stores)
    store_paths.update(_parse_store_flags(settings.get_list("store")))
    stores = load_stores(model.specs, store_paths)

    corpus = load_corpus(args.corpus, settings.schema(), delimiter=settings.delimiter())
    predictions = predict_pipeline(corpus, model, scaler, stores)

    lines = ["id,probability"]
    lines.extend(f"{p.record_id},{p.probability:.6f}" for p in predictions)
    atomic_write_text(args.out, "\n".join(lines) + "\n")

    if settings.get_bool("figures", True):
        from . import report

        report.save_probability_histogram(
            [p.probability for p in predictions], f"{args.out}.probability_hist.png"
        )
    _write_run_manifest(
        f"{args.out}.manifest.txt",
        "predict",
        {"model": args.model, "corpus": args.corpus, "out": args.out, "records": len(predictions)},
    )
    print(f"wrote {len(predictions)} predictions -> {args.out}")
    return 0


def _read_predictions(path: str) -> list[tuple[str, float]]:
    import csv

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read predictions {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or [h.strip() for h in header[:2]] != ["id", "probability"]:
            raise CorpusError(f"{path}: expected header id,probability")
        out = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) < 2:
                raise CorpusError(f"{path} row {row_no}: expected id,probability")
            try:
                out.append((row[0], float(row[1])))
            except ValueError:
                raise CorpusError(f"{path} row {row_no}: bad probability {row[1]!r}") from None
    return out


def _read_gold(path: str, id_col: str, label_col: str, delimiter: str) -> dict[str, int]:
    import csv

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read gold file {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise CorpusError(f"{path}: empty gold file")
        index = {name: i for i, name in enumerate(header)}
        for col in (id_col, label_col):
            if col not in index:
                raise CorpusError(f"{path}: column {col!r} not in header")
        gold = {}
        needed = max(index[id_col], index[label_col])
        for row_no, row in enumerate(reader, start=2):
            if len(row) <= needed:
                raise CorpusError(f"{path} row {row_no}: expected at least {needed + 1} fields")
            rid = row[index[id_col]].strip()
            raw = row[index[label_col]].strip()
            try:
                value = int(float(raw))
            except ValueError:
                raise CorpusError(f"{path} row {row_no}: bad label {raw!r}") from None
            if value not in (0, 1):
                raise CorpusError(f"{path} row {row_no}: label must be 0 or 1, got {raw!r}")
            gold[rid] = value
    return gold


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    predictions = _read_predictions(args.pred)
    gold = _read_gold(
        args.gold,
        settings.get("col_id", "id"),
        settings.get("col_label", "label"),
        settings.delimiter(),
    )
    scores = []
    labels = []
    for rid, prob in predictions:
        if rid not in gold:
            raise CorpusError(f"prediction id {rid!r} not present in gold file")
        scores.append(prob)
        labels.append(gold[rid])
    result = roc_auc(scores, labels)
    print(f"ROC-AUC {result.auc:.4f}")
    kv = f"auc={result.auc:.17g}\nn_pos={result.n_pos}\nn_neg={result.n_neg}\n"
    print(kv, end="")
    if args.report:
        from . import report

        report_dir = Path(args.report)
        report_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(report_dir / "evaluation.txt", kv)
        report.save_roc_curve(scores, labels, result.auc, report_dir / "roc_curve.png")
        _write_run_manifest(
            report_dir / "run_manifest.txt", "evaluate", {"pred": args.pred, "gold": args.gold}
        )
        print(f"report written to {report_dir}", file=sys.stderr)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    settings = Settings(args)
    n = settings.get("n", 2000, int)
    seed = settings.get("seed", 13, int)
    records = generate_corpus(n, seed, labeled=not args.unlabeled)
    write_corpus(records, args.out, delimiter=settings.delimiter())
    _write_run_manifest(
        f"{args.out}.manifest.txt",
        "synth",
        {"out": args.out, "n": n, "seed": seed, "labeled": not args.unlabeled},
    )
    print(f"wrote {len(records)} synthetic records -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--delimiter", help="field delimiter: comma (default) or tab")
    for attr in ATTRIBUTES:
        parser.add_argument(
            f"--col-{attr.replace('_', '-')}",
            dest=f"col_{attr}",
            metavar="NAME",
            help=f"column holding {attr}",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relipost",
        description="Classify social-network posts as reliable or unreliable.",
    )
    parser.add_argument("--version", action="version", version=f"relipost {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("stats", help="print corpus statistics")
    p.add_argument("file", help="corpus file")
    p.add_argument("--report", metavar="DIR", help="also write stats.txt and figures here")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("preprocess", help="dedup, lower titles, fit the scaler")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-corpus", required=True, help="processed corpus path")
    p.add_argument("--out-scaler", required=True, help="scaler state path")
    p.add_argument("--labeled", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--dedup", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--fit-scope", dest="fit_scope", choices=["all", "train"])
    p.add_argument("--extra-corpus", dest="extra_corpus", action="append", metavar="FILE")
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("encode", help="build a hashing-encoder embedding store")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output store path")
    p.add_argument("--dim", type=int)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--name", help="encoder name recorded in the store")
    _add_common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train the k-fold ensemble")
    p.add_argument("--corpus", required=True, help="labeled training corpus")
    p.add_argument("--out-dir", required=True, help="ensemble output directory")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--lr-override", dest="lr_override", type=float)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument(
        "--encoder",
        action="append",
        metavar="NAME[:KIND[:DIM]]",
        help="encoder spec; repeatable (default hash:hashing:256)",
    )
    p.add_argument("--store", action="append", metavar="NAME=PATH", help="embedding store path")
    p.add_argument("--dedup", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--fit-scope", dest="fit_scope", choices=["all", "train"])
    p.add_argument("--extra-corpus", dest="extra_corpus", action="append", metavar="FILE")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a corpus with a trained ensemble")
    p.add_argument("--model", required=True, help="ensemble directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output id,probability file")
    p.add_argument("--store", action="append", metavar="NAME=PATH")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="ROC-AUC of predictions against gold labels")
    p.add_argument("--pred", required=True, help="id,probability file")
    p.add_argument("--gold", required=True, help="delimited file with id and label columns")
    p.add_argument("--report", metavar="DIR", help="also write evaluation.txt and the ROC curve")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic demo corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--unlabeled", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error [{module}]: {exc}", file=sys.stderr)
        return 2
    except RelipostError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
