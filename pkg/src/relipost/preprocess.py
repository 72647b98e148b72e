"""Per-post preprocessing: imputation-aware min-max scaling of the numeric
attributes, all-caps title detection, day offsets, training dedup, and the
six-element metadata vector fed to the classifier."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

from .corpus import PostRecord
from .errors import DataError

# Fixed metadata order; downstream fusion appends this vector after the
# encoder representations.
METADATA_FEATURES = (
    "num_like_post",
    "num_comment_post",
    "num_share_post",
    "has_images",
    "include_a_title",
    "day_in_year",
)

# Attributes that go through impute-then-scale.
SCALED_ATTRIBUTES = ("num_like", "num_comment", "num_share", "day_in_year")

# 2020-01-01T00:00:00Z; day offsets are counted from here.
DAY_ZERO_EPOCH = 1_577_836_800
_SECONDS_PER_DAY = 86_400

DEFAULT_TITLE_MIN_TOKENS = 4

_TOKEN_RE = re.compile(r"\S+")


class ScalerError(DataError):
    """An attribute has no valid values in the fit scope."""


class DedupError(DataError):
    """Training dedup saw an unlabeled record."""


class FitScope(str, Enum):
    """Which splits feed the scaler fit.

    ALL_SPLITS matches the original setup (statistics pooled over every
    split); TRAIN_ONLY avoids test-set leakage for honest evaluation.
    """

    ALL_SPLITS = "all"
    TRAIN_ONLY = "train"


@dataclass(frozen=True)
class AttributeScaler:
    """Fit summary of one attribute: mean of valid values, observed range."""

    mean: float
    min: float
    max: float

    @property
    def degenerate(self) -> bool:
        return self.min == self.max


@dataclass(frozen=True)
class ScalerState:
    """Per-attribute scalers, keyed by SCALED_ATTRIBUTES."""

    attributes: dict[str, AttributeScaler]

    def to_text(self) -> str:
        # 17 significant digits round-trip float64 exactly.
        lines = []
        for attr in SCALED_ATTRIBUTES:
            sc = self.attributes[attr]
            lines.append(f"{attr}.mean={sc.mean:.17g}")
            lines.append(f"{attr}.min={sc.min:.17g}")
            lines.append(f"{attr}.max={sc.max:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ScalerState":
        values: dict[str, float] = {}
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            if not sep:
                raise ScalerError(f"scaler state line {line_no}: expected key=value, got {line!r}")
            try:
                values[key.strip()] = float(raw.strip())
            except ValueError:
                raise ScalerError(f"scaler state line {line_no}: bad number {raw!r}") from None
        attributes = {}
        for attr in SCALED_ATTRIBUTES:
            try:
                attributes[attr] = AttributeScaler(
                    mean=values[f"{attr}.mean"],
                    min=values[f"{attr}.min"],
                    max=values[f"{attr}.max"],
                )
            except KeyError as missing:
                raise ScalerError(f"scaler state is missing key {missing}") from None
        return cls(attributes)


@dataclass(frozen=True)
class MetadataVector:
    """The six scaled metadata features in METADATA_FEATURES order."""

    values: tuple[float, float, float, float, float, float]

    def __post_init__(self) -> None:
        if len(self.values) != len(METADATA_FEATURES):
            raise ValueError(
                f"metadata vector needs {len(METADATA_FEATURES)} values, got {len(self.values)}"
            )


@dataclass(frozen=True)
class TitleScan:
    """Title-detection result; spans are [start, end) character offsets."""

    has_title: bool
    spans: tuple[tuple[int, int], ...]
    lowered_message: str


def day_in_year(timestamp: int) -> int:
    """Whole days elapsed since 2020-01-01T00:00:00Z (floor; negative before)."""
    return (timestamp - DAY_ZERO_EPOCH) // _SECONDS_PER_DAY


def _raw_value(record: PostRecord, attr: str) -> float | None:
    if attr == "num_like":
        return record.num_like_post
    if attr == "num_comment":
        return record.num_comment_post
    if attr == "num_share":
        return record.num_share_post
    if attr == "day_in_year":
        if record.timestamp_post is None:
            return None
        return float(day_in_year(record.timestamp_post))
    raise KeyError(attr)


def fit_scaler(
    corpora: Sequence[Sequence[PostRecord]],
    fit_scope: FitScope = FitScope.ALL_SPLITS,
) -> ScalerState:
    """Fit per-attribute scalers over the given splits.

    ``corpora[0]`` is the training split; TRAIN_ONLY restricts the fit to it.
    Means use valid values only. Min/max are taken after imputation, and since
    imputed values equal the mean they never extend the observed range.
    """
    if not corpora:
        raise ScalerError("no corpora given to fit")
    if fit_scope is FitScope.TRAIN_ONLY:
        scope: list[PostRecord] = list(corpora[0])
    else:
        scope = [r for split in corpora for r in split]

    attributes = {}
    for attr in SCALED_ATTRIBUTES:
        valid = [v for v in (_raw_value(r, attr) for r in scope) if v is not None]
        if not valid:
            raise ScalerError(f"attribute {attr!r} has no valid values in the fit scope")
        attributes[attr] = AttributeScaler(
            mean=sum(valid) / len(valid),
            min=min(valid),
            max=max(valid),
        )
    return ScalerState(attributes)


def apply_scaler(record: PostRecord, state: ScalerState) -> dict[str, float]:
    """Impute missing attributes with the fitted mean, then min-max scale.

    Total on any record: a degenerate attribute (min == max) maps to 0.0.
    """
    scaled = {}
    for attr in SCALED_ATTRIBUTES:
        sc = state.attributes[attr]
        x = _raw_value(record, attr)
        if x is None:
            x = sc.mean
        if sc.degenerate:
            scaled[attr] = 0.0
        else:
            scaled[attr] = (x - sc.min) / (sc.max - sc.min)
    return scaled


def _is_shouted(token: str) -> bool:
    # A token joins a title run when it has at least one letter and every
    # letter is uppercase with a distinct lowercase form (so caseless
    # "uppercase" codepoints cannot produce spans that survive lowering).
    # Digits and punctuation do not participate in the case test.
    has_alpha = False
    for ch in token:
        if ch.isalpha():
            has_alpha = True
            if not ch.isupper() or ch.lower() == ch:
                return False
    return has_alpha


def detect_title(message: str, min_tokens: int = DEFAULT_TITLE_MIN_TOKENS) -> TitleScan:
    """Find maximal runs of >= min_tokens consecutive all-caps tokens.

    Tokens are whitespace-separated, the case test is Unicode-aware, and
    ``lowered_message`` lowercases exactly the detected spans. Scanning the
    lowered message again finds nothing.
    """
    spans: list[tuple[int, int]] = []
    run: list[re.Match] = []

    def flush() -> None:
        if len(run) >= min_tokens:
            spans.append((run[0].start(), run[-1].end()))
        run.clear()

    for match in _TOKEN_RE.finditer(message):
        if _is_shouted(match.group()):
            run.append(match)
        else:
            flush()
    flush()

    if not spans:
        return TitleScan(False, (), message)
    pieces = []
    prev = 0
    for start, end in spans:
        pieces.append(message[prev:start])
        pieces.append(message[start:end].lower())
        prev = end
    pieces.append(message[prev:])
    return TitleScan(True, tuple(spans), "".join(pieces))


def lower_titles(record: PostRecord, min_tokens: int = DEFAULT_TITLE_MIN_TOKENS) -> PostRecord:
    """Replace detected title runs in the message with their lowercase form."""
    scan = detect_title(record.post_message, min_tokens)
    if not scan.has_title:
        return record
    return replace(record, post_message=scan.lowered_message)


def dedup_training(records: Iterable[PostRecord]) -> tuple[list[PostRecord], int]:
    """Drop later records matching an earlier one on the dedup key.

    The key is (message, likes, comments, shares, label); a missing value
    compares equal only to another missing value. Order is preserved and the
    first member of each duplicate group is always kept.
    """
    seen: set = set()
    kept: list[PostRecord] = []
    removed = 0
    for r in records:
        if r.label is None:
            raise DedupError(f"record {r.id!r} has no label; dedup applies to labeled training data")
        key = (r.post_message, r.num_like_post, r.num_comment_post, r.num_share_post, r.label)
        if key in seen:
            removed += 1
        else:
            seen.add(key)
            kept.append(r)
    return kept, removed


def build_metadata(record: PostRecord, state: ScalerState) -> MetadataVector:
    """Assemble the six metadata features for one record.

    Flags are exact 0/1; the scaled attributes land in [0, 1] whenever the
    scaler's fit scope covers the record.
    """
    scaled = apply_scaler(record, state)
    scan = detect_title(record.post_message)
    return MetadataVector(
        (
            scaled["num_like"],
            scaled["num_comment"],
            scaled["num_share"],
            1.0 if record.images else 0.0,
            1.0 if scan.has_title else 0.0,
            scaled["day_in_year"],
        )
    )
