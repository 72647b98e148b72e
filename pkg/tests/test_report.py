import numpy as np
import pytest

from relipost import report
from relipost.metrics import roc_auc

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def assert_png(path):
    data = path.read_bytes()
    assert data.startswith(PNG_MAGIC)
    assert len(data) > 1000


def test_message_length_histogram(tmp_path):
    path = tmp_path / "lengths.png"
    report.save_message_length_histogram([10, 20, 20, 35, 170], path)
    assert_png(path)


def test_fold_auc_chart(tmp_path):
    path = tmp_path / "folds.png"
    report.save_fold_auc_chart([0.91, 0.95, 0.99], path)
    assert_png(path)


def test_roc_curve(tmp_path):
    rng = np.random.default_rng(0)
    scores = rng.random(50)
    labels = (scores + rng.normal(scale=0.3, size=50) > 0.5).astype(int)
    labels[:2] = [0, 1]
    auc = roc_auc(scores, labels).auc
    path = tmp_path / "roc.png"
    report.save_roc_curve(scores, labels, auc, path)
    assert_png(path)


def test_probability_histogram(tmp_path):
    path = tmp_path / "probs.png"
    report.save_probability_histogram([0.1, 0.5, 0.9, 0.95], path)
    assert_png(path)


def test_roc_points_endpoints_and_monotonicity():
    scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.5]
    labels = [1, 1, 0, 1, 0, 0]
    fpr, tpr = report.roc_points(scores, labels)
    assert fpr[0] == 0.0 and tpr[0] == 0.0
    assert fpr[-1] == 1.0 and tpr[-1] == 1.0
    assert np.all(np.diff(fpr) >= 0)
    assert np.all(np.diff(tpr) >= 0)


def test_roc_points_area_matches_auc():
    rng = np.random.default_rng(3)
    scores = np.round(rng.random(200), 2)
    labels = rng.integers(0, 2, size=200)
    labels[:2] = [0, 1]
    fpr, tpr = report.roc_points(scores, labels)
    area = float(np.trapezoid(tpr, fpr))
    assert area == pytest.approx(roc_auc(scores, labels).auc, abs=1e-12)
