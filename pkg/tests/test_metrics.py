import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relipost.metrics import EvalResult, MetricError, roc_auc


def pairwise_auc(scores, labels):
    """Brute-force oracle: the all-pairs definition, computed directly."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def random_instance(rng, max_n=500):
    """Random scores with ties injected and both classes guaranteed."""
    n = int(rng.integers(2, max_n + 1))
    scores = rng.normal(size=n)
    if rng.random() < 0.7:
        scores = np.round(scores, int(rng.integers(0, 3)))  # inject ties
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1
    return scores, labels


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0.2, 0.8], [0, 1]).auc == 1.0

    def test_all_tied_is_half(self):
        assert roc_auc([0.5, 0.5], [0, 1]).auc == 0.5

    def test_reversed_is_zero(self):
        assert roc_auc([0.8, 0.2], [0, 1]).auc == 0.0

    def test_counts_reported(self):
        result = roc_auc([0.1, 0.2, 0.9], [0, 0, 1])
        assert result == EvalResult(auc=1.0, n_pos=1, n_neg=2)

    def test_small_case_by_hand(self):
        # pairs: (0.7,0.3)=1, (0.7,0.5)=1, (0.5,0.3)=1, (0.5,0.5)=0.5 -> 3.5/4
        assert roc_auc([0.3, 0.5, 0.7, 0.5], [0, 0, 1, 1]).auc == pytest.approx(3.5 / 4)

    def test_matches_pairwise_oracle_on_200_random_instances(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            scores, labels = random_instance(rng)
            assert abs(roc_auc(scores, labels).auc - pairwise_auc(scores, labels)) <= 1e-12

    def test_invariant_under_strictly_increasing_transform(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            scores, labels = random_instance(rng, max_n=100)
            base = roc_auc(scores, labels).auc
            for transform in (np.exp, lambda s: 3 * s + 7, np.arctan):
                assert roc_auc(transform(scores), labels).auc == pytest.approx(base, abs=1e-12)

    def test_complement_symmetry_including_ties(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            scores, labels = random_instance(rng, max_n=100)
            assert roc_auc(-scores, labels).auc == pytest.approx(
                1.0 - roc_auc(scores, labels).auc, abs=1e-12
            )

    @given(
        st.lists(st.integers(-5, 5), min_size=2, max_size=40),
        st.randoms(use_true_random=False),
    )
    def test_pairwise_agreement_property(self, raw_scores, rnd):
        labels = [rnd.randint(0, 1) for _ in raw_scores]
        labels[0], labels[-1] = 0, 1
        scores = [float(s) for s in raw_scores]
        assert abs(roc_auc(scores, labels).auc - pairwise_auc(scores, labels)) <= 1e-12

    def test_single_class_rejected(self):
        with pytest.raises(MetricError, match="both classes"):
            roc_auc([0.1, 0.2], [1, 1])

    def test_length_mismatch_rejected(self):
        with pytest.raises(MetricError):
            roc_auc([0.1, 0.2], [0, 1, 1])

    def test_non_finite_score_rejected(self):
        with pytest.raises(MetricError, match="non-finite"):
            roc_auc([0.1, float("nan")], [0, 1])

    def test_empty_rejected(self):
        with pytest.raises(MetricError):
            roc_auc([], [])

    def test_bad_labels_rejected(self):
        with pytest.raises(MetricError, match="0 or 1"):
            roc_auc([0.1, 0.2], [0, 2])
