"""Figure rendering for the CLI report path.

Every function writes one PNG next to the command's delimited output. The
Agg backend keeps rendering headless and reproducible.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_message_length_histogram(lengths: Sequence[int], path) -> None:
    """Frequency of post message lengths, in characters."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(list(lengths), bins=40, color="#4878cf", edgecolor="white")
    ax.set_xlabel("post message length (characters)")
    ax.set_ylabel("frequency")
    ax.set_title("Message length distribution")
    _finish(fig, path)


def save_fold_auc_chart(fold_aucs: Sequence[float], path) -> None:
    """Validation ROC-AUC per fold, with the mean drawn as a reference line."""
    aucs = list(fold_aucs)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(aucs)), aucs, color="#4878cf")
    mean = float(np.mean(aucs))
    ax.axhline(mean, color="#d65f5f", linestyle="--", label=f"mean {mean:.4f}")
    ax.set_xlabel("fold")
    ax.set_ylabel("validation ROC-AUC")
    ax.set_ylim(0.0, 1.05)
    ax.set_xticks(range(len(aucs)))
    ax.legend(loc="lower right")
    ax.set_title("Per-fold validation ROC-AUC")
    _finish(fig, path)


def roc_points(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """ROC curve vertices (FPR, TPR), one per distinct threshold."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # keep only the last index of each tied-score group
    distinct = np.flatnonzero(np.diff(s)) if s.size > 1 else np.array([], dtype=int)
    idx = np.concatenate((distinct, [s.size - 1]))
    tps = np.cumsum(y)[idx]
    fps = (idx + 1) - tps
    n_pos = float(y.sum())
    n_neg = float(y.size - y.sum())
    tpr = np.concatenate(([0.0], tps / n_pos))
    fpr = np.concatenate(([0.0], fps / n_neg))
    return fpr, tpr


def save_roc_curve(scores, labels, auc: float, path) -> None:
    fpr, tpr = roc_points(scores, labels)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(fpr, tpr, color="#4878cf", label=f"ROC-AUC {auc:.4f}")
    ax.plot([0, 1], [0, 1], color="#999999", linestyle=":", linewidth=1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right")
    ax.set_title("ROC curve")
    _finish(fig, path)


def save_probability_histogram(probabilities: Sequence[float], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(list(probabilities), bins=40, range=(0.0, 1.0), color="#4878cf", edgecolor="white")
    ax.set_xlabel("predicted probability (unreliable)")
    ax.set_ylabel("count")
    ax.set_title("Prediction distribution")
    _finish(fig, path)
