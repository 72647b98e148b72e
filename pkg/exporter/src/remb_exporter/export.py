"""Export sentence vectors from a frozen transformer into a REMB store.

For every corpus record the message is tokenized (optionally word-segmented
first by an external command), truncated, and run through the model in eval
mode; the final-layer hidden state of the first ([CLS]) token becomes the
record's vector. Model weights are never modified. Output is the little-endian
REMB format consumed by the classification pipeline:

    magic "REMB" | version u16=1 | name_len u16 | name UTF-8 |
    dim u32 | count u64 | count x (id_len u16 | id UTF-8 | dim x f32)
"""

from __future__ import annotations

import csv
import logging
import os
import struct
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

STORE_MAGIC = b"REMB"
STORE_VERSION = 1

DEFAULT_MAX_LENGTH = 256


class ExporterError(Exception):
    """Unusable model, corpus, or segmentation setup."""


@dataclass
class ExporterConfig:
    model: str
    corpus: str
    out: str
    max_length: int = DEFAULT_MAX_LENGTH
    batch_size: int = 16
    id_column: str = "id"
    message_column: str = "post_message"
    delimiter: str = ","
    encoder_name: str | None = None  # default: basename of the model id
    word_segment: bool = False
    segment_command: Sequence[str] = field(default_factory=tuple)
    on_error: str = "abort"  # or "skip": drop records the tokenizer rejects

    def __post_init__(self) -> None:
        if self.max_length < 1:
            raise ExporterError(f"max_length must be >= 1, got {self.max_length}")
        if self.batch_size < 1:
            raise ExporterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.on_error not in ("abort", "skip"):
            raise ExporterError(f"on_error must be abort or skip, got {self.on_error!r}")
        if self.word_segment and not self.segment_command:
            raise ExporterError("word_segment requires a segment_command")


@dataclass(frozen=True)
class ExportSummary:
    out: str
    encoder_name: str
    dim: int
    count: int
    skipped: int


def read_messages(config: ExporterConfig) -> list[tuple[str, str]]:
    """Read (id, message) pairs from the delimited corpus file."""
    path = config.corpus
    if not os.path.exists(path):
        raise ExporterError(f"corpus file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=config.delimiter)
        header = next(reader, None)
        if header is None:
            raise ExporterError(f"{path}: empty file, header row required")
        index = {name: i for i, name in enumerate(header)}
        for col in (config.id_column, config.message_column):
            if col not in index:
                raise ExporterError(f"{path}: column {col!r} not in header")
        rows: list[tuple[str, str]] = []
        seen: set[str] = set()
        needed = max(index[config.id_column], index[config.message_column])
        for row_no, row in enumerate(reader, start=2):
            if len(row) <= needed:
                raise ExporterError(f"{path} row {row_no}: expected at least {needed + 1} fields")
            rid = row[index[config.id_column]].strip()
            if not rid:
                raise ExporterError(f"{path} row {row_no}: empty record id")
            if rid in seen:
                raise ExporterError(f"{path} row {row_no}: duplicate id {rid!r}")
            seen.add(rid)
            rows.append((rid, row[index[config.message_column]]))
    return rows


def segment_messages(messages: Sequence[str], command: Sequence[str]) -> list[str]:
    """Run the external word segmenter over one message per line.

    Embedded newlines are flattened to spaces first, as the protocol is
    line-oriented. The command must preserve the line count.
    """
    flat = [m.replace("\r", " ").replace("\n", " ") for m in messages]
    try:
        proc = subprocess.run(
            list(command),
            input="\n".join(flat),
            capture_output=True,
            text=True,
            check=False,
        )
    except OSError as exc:
        raise ExporterError(f"cannot run segmenter {command!r}: {exc}") from None
    if proc.returncode != 0:
        raise ExporterError(f"segmenter exited with {proc.returncode}: {proc.stderr.strip()}")
    segmented = proc.stdout.split("\n")
    if segmented and segmented[-1] == "":
        segmented.pop()
    if len(segmented) != len(messages):
        raise ExporterError(
            f"segmenter returned {len(segmented)} lines for {len(messages)} messages"
        )
    return segmented


def write_remb(path, name: str, dim: int, items: Iterable[tuple[str, np.ndarray]]) -> int:
    """Serialize (id, float32 vector) pairs; returns the record count."""
    name_bytes = name.encode("utf-8")
    body = bytearray()
    count = 0
    for record_id, vector in items:
        arr = np.asarray(vector, dtype="<f4")
        if arr.shape != (dim,):
            raise ExporterError(f"vector for {record_id!r} has shape {arr.shape}, want ({dim},)")
        id_bytes = record_id.encode("utf-8")
        body += struct.pack("<H", len(id_bytes))
        body += id_bytes
        body += arr.tobytes()
        count += 1
    header = (
        STORE_MAGIC
        + struct.pack("<H", STORE_VERSION)
        + struct.pack("<H", len(name_bytes))
        + name_bytes
        + struct.pack("<I", dim)
        + struct.pack("<Q", count)
    )
    tmp = f"{os.fspath(path)}.tmp{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(header + bytes(body))
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return count


def load_frozen_model(model_id: str):
    """Load tokenizer and model in eval mode with gradients disabled."""
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ExporterError(f"cannot load model {model_id!r}: {exc}") from None
    model.eval()
    model.requires_grad_(False)
    torch.set_grad_enabled(False)
    return tokenizer, model


def export(config: ExporterConfig, tokenizer=None, model=None) -> ExportSummary:
    """Run the export; ``tokenizer``/``model`` may be preloaded (e.g. reuse
    across corpora, or injection in tests)."""
    import torch

    rows = read_messages(config)
    if tokenizer is None or model is None:
        tokenizer, model = load_frozen_model(config.model)
    dim = int(model.config.hidden_size)
    name = config.encoder_name or Path(config.model).name or "transformer"

    messages = [msg for _, msg in rows]
    if config.word_segment:
        messages = segment_messages(messages, config.segment_command)

    encodings = []
    kept_ids = []
    skipped = 0
    for (rid, _), msg in zip(rows, messages):
        try:
            enc = tokenizer(msg, truncation=True, max_length=config.max_length)
        except Exception as exc:
            if config.on_error == "skip":
                logger.warning("skipping record %r: tokenization failed: %s", rid, exc)
                skipped += 1
                continue
            raise ExporterError(f"tokenization failed for record {rid!r}: {exc}") from None
        encodings.append(enc)
        kept_ids.append(rid)

    vectors: list[np.ndarray] = []
    for start in range(0, len(encodings), config.batch_size):
        batch = tokenizer.pad(encodings[start : start + config.batch_size], return_tensors="pt")
        with torch.no_grad():
            output = model(**batch)
        cls = output.last_hidden_state[:, 0, :].to(torch.float32).cpu().numpy()
        vectors.extend(np.ascontiguousarray(cls[i]) for i in range(cls.shape[0]))

    count = write_remb(config.out, name, dim, zip(kept_ids, vectors))
    _write_manifest(config, name, dim, count, skipped)
    return ExportSummary(out=config.out, encoder_name=name, dim=dim, count=count, skipped=skipped)


def _write_manifest(config: ExporterConfig, name: str, dim: int, count: int, skipped: int) -> None:
    lines = [
        f"model={config.model}",
        f"encoder_name={name}",
        f"dim={dim}",
        f"count={count}",
        f"skipped={skipped}",
        f"max_length={config.max_length}",
        f"word_segment={'true' if config.word_segment else 'false'}",
    ]
    Path(f"{config.out}.manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
