"""Delimited-text corpus ingestion, validation, and dataset statistics.

Input files are UTF-8 delimited text (comma or tab) with a header row and
quoted fields. Cells that cannot be parsed become missing values; duplicate
record ids are a hard error.
"""

from __future__ import annotations

import ast
import csv
import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import DataError
from .ioutil import atomic_write_text

# Attribute keys a schema may map to column names. The first seven are
# required in every file; images and label are optional.
ATTRIBUTES = (
    "id",
    "user_name",
    "post_message",
    "timestamp_post",
    "num_like_post",
    "num_comment_post",
    "num_share_post",
    "images",
    "label",
)

REQUIRED_ATTRIBUTES = ATTRIBUTES[:7]

DEFAULT_SCHEMA: dict[str, str] = {attr: attr for attr in ATTRIBUTES}

# Civil-calendar bounds for Unix timestamps (years 1..9999, UTC).
_TIMESTAMP_MIN = -62_135_596_800
_TIMESTAMP_MAX = 253_402_300_799

_EMPTY_CELL_MARKERS = frozenset({"", "nan", "none", "null"})


class CorpusError(DataError):
    """Unreadable file, missing mapped column, or invalid record ids."""


@dataclass(frozen=True)
class PostRecord:
    """One social-network post. Optional fields are None when missing."""

    id: str
    user_name: str
    post_message: str
    timestamp_post: int | None = None
    num_like_post: float | None = None
    num_comment_post: float | None = None
    num_share_post: float | None = None
    images: tuple[str, ...] = ()
    label: int | None = None


@dataclass(frozen=True)
class CorpusStats:
    """Split-level statistics.

    Duplicated counts follow the group-member convention: every record whose
    message (or user) appears two or more times is counted, not just the
    excess copies.
    """

    n_examples: int
    avg_message_length: float
    n_with_images: int
    n_duplicated_posts: int
    n_duplicated_users: int


def _parse_count(cell: str | None) -> float | None:
    # Likes/comments/shares must be finite and >= 0; anything else is missing.
    if cell is None:
        return None
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        return None
    if not math.isfinite(value) or value < 0:
        return None
    return value


def _parse_timestamp(cell: str | None) -> int | None:
    if cell is None:
        return None
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        return None
    if not math.isfinite(value):
        return None
    seconds = math.floor(value)
    if seconds < _TIMESTAMP_MIN or seconds > _TIMESTAMP_MAX:
        return None
    return int(seconds)


def _parse_label(cell: str | None) -> int | None:
    if cell is None:
        return None
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        return None
    if value == 0.0:
        return 0
    if value == 1.0:
        return 1
    return None


def _parse_images(cell: str | None) -> tuple[str, ...]:
    # Accepts a python-style list literal or semicolon-joined URLs.
    if cell is None:
        return ()
    cell = cell.strip()
    if cell.lower() in _EMPTY_CELL_MARKERS or cell == "[]":
        return ()
    if cell.startswith("[") and cell.endswith("]"):
        try:
            parsed = ast.literal_eval(cell)
        except (ValueError, SyntaxError):
            parsed = None
        if isinstance(parsed, (list, tuple)):
            return tuple(s for s in (str(item).strip() for item in parsed) if s)
    return tuple(part for part in (p.strip() for p in cell.split(";")) if part)


def load_corpus(
    path: str | os.PathLike,
    schema: Mapping[str, str] | None = None,
    *,
    has_labels: bool = False,
    delimiter: str = ",",
) -> list[PostRecord]:
    """Load one corpus split, preserving row order.

    ``schema`` maps attribute keys (see ATTRIBUTES) to column names in the
    file; omitted keys default to the attribute name itself. Unparseable
    numerics, negatives, empty cells, and out-of-range timestamps load as
    missing values. Labels are read only when ``has_labels`` is set.
    """
    path = os.fspath(path)
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = sorted(set(schema) - set(ATTRIBUTES))
        if unknown:
            raise CorpusError(f"unknown schema attributes: {', '.join(unknown)}")
        colmap.update(schema)
    if not os.path.exists(path):
        raise CorpusError(f"corpus file not found: {path}")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty file, header row required") from None
        index = {name: i for i, name in enumerate(header)}

        required = list(REQUIRED_ATTRIBUTES)
        if has_labels:
            required.append("label")
        for attr in required:
            if colmap[attr] not in index:
                raise CorpusError(
                    f"{path}: column {colmap[attr]!r} (attribute {attr!r}) not in header"
                )

        def cell(row: list[str], attr: str) -> str | None:
            col = index.get(colmap[attr])
            if col is None or col >= len(row):
                return None
            return row[col]

        records: list[PostRecord] = []
        seen: dict[str, int] = {}
        for row_no, row in enumerate(reader, start=2):
            rid = (cell(row, "id") or "").strip()
            if not rid:
                raise CorpusError(f"{path} row {row_no}: empty record id")
            if rid in seen:
                raise CorpusError(
                    f"{path} row {row_no}: duplicate id {rid!r} (first seen at row {seen[rid]})"
                )
            seen[rid] = row_no
            records.append(
                PostRecord(
                    id=rid,
                    user_name=cell(row, "user_name") or "",
                    post_message=cell(row, "post_message") or "",
                    timestamp_post=_parse_timestamp(cell(row, "timestamp_post")),
                    num_like_post=_parse_count(cell(row, "num_like_post")),
                    num_comment_post=_parse_count(cell(row, "num_comment_post")),
                    num_share_post=_parse_count(cell(row, "num_share_post")),
                    images=_parse_images(cell(row, "images")),
                    label=_parse_label(cell(row, "label")) if has_labels else None,
                )
            )
    return records


def write_corpus(
    records: Sequence[PostRecord],
    path: str | os.PathLike,
    *,
    delimiter: str = ",",
    extra_columns: Mapping[str, Sequence[str]] | None = None,
) -> None:
    """Write records in the canonical column layout.

    Numbers are rendered with repr so a write/load cycle reproduces them
    exactly. ``extra_columns`` appends named columns (one value per record);
    the loader ignores columns it has no mapping for.
    """
    extras = dict(extra_columns or {})
    for name, values in extras.items():
        if len(values) != len(records):
            raise CorpusError(f"extra column {name!r}: {len(values)} values for {len(records)} records")

    import io

    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(list(ATTRIBUTES) + list(extras))
    for i, r in enumerate(records):
        row = [
            r.id,
            r.user_name,
            r.post_message,
            "" if r.timestamp_post is None else str(r.timestamp_post),
            "" if r.num_like_post is None else repr(r.num_like_post),
            "" if r.num_comment_post is None else repr(r.num_comment_post),
            "" if r.num_share_post is None else repr(r.num_share_post),
            ";".join(r.images),
            "" if r.label is None else str(r.label),
        ]
        row.extend(extras[name][i] for name in extras)
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def compute_stats(corpus: Sequence[PostRecord]) -> CorpusStats:
    """Compute split statistics; message length counts Unicode scalar values."""
    if not corpus:
        raise CorpusError("cannot compute statistics of an empty corpus")
    message_counts = Counter(r.post_message for r in corpus)
    user_counts = Counter(r.user_name for r in corpus)
    return CorpusStats(
        n_examples=len(corpus),
        avg_message_length=sum(len(r.post_message) for r in corpus) / len(corpus),
        n_with_images=sum(1 for r in corpus if r.images),
        n_duplicated_posts=sum(c for c in message_counts.values() if c >= 2),
        n_duplicated_users=sum(c for c in user_counts.values() if c >= 2),
    )
