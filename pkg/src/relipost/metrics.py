"""Exact ROC-AUC.

Computed by the Mann-Whitney rank statistic with average ranks for ties,
which equals the all-pairs definition (a positive scored above a negative
earns 1, a tie earns 0.5, normalized by n_pos * n_neg) in O(n log n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


class MetricError(DataError):
    """Inputs on which ROC-AUC is undefined or malformed."""


@dataclass(frozen=True)
class EvalResult:
    auc: float
    n_pos: int
    n_neg: int


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied groups sharing their average rank."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(sorted_vals[1:] != sorted_vals[:-1]) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [values.size]))
    # group occupies sorted positions [start, end) -> ranks start+1 .. end
    group_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(values.size, dtype=np.float64)
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def roc_auc(scores, labels) -> EvalResult:
    """Probability that a random positive outranks a random negative.

    Requires equal-length inputs, finite scores, and both classes present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or y.ndim != 1 or s.shape != y.shape:
        raise MetricError(f"scores and labels must be equal-length 1-D, got {s.shape} vs {y.shape}")
    if s.size == 0:
        raise MetricError("empty input")
    if not np.all(np.isfinite(s)):
        raise MetricError("scores contain non-finite values")
    if not np.all((y == 0) | (y == 1)):
        raise MetricError("labels must be 0 or 1")

    n_pos = int(np.sum(y == 1))
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricError(f"both classes required (n_pos={n_pos}, n_neg={n_neg})")

    ranks = _average_ranks(s)
    pos_rank_sum = float(np.sum(ranks[y == 1]))
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return EvalResult(auc=u / (n_pos * n_neg), n_pos=n_pos, n_neg=n_neg)
