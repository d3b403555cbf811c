import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mplexnet.metrics import (
    DegenerateVarianceError,
    UndefinedAucError,
    auroc,
    delong_test,
    per_class_report,
    weighted_average,
)


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == 1.0

    def test_tie_handling(self):
        assert auroc([0.5, 0.5], [1, 0]) == 0.5

    def test_inverted(self):
        assert auroc([0.2, 0.9], [1, 0]) == 0.0

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedAucError):
            auroc([0.1, 0.2], [1, 1])

    def test_matches_pairwise_oracle(self, rng):
        for _ in range(20):
            n = int(rng.integers(4, 30))
            scores = np.round(rng.random(n), 2)  # rounding forces ties
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                continue
            pos = scores[labels == 1]
            neg = scores[labels == 0]
            wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
            assert auroc(scores, labels) == pytest.approx(
                wins / (len(pos) * len(neg)), abs=1e-12
            )

    @given(st.integers(min_value=0, max_value=2**31 - 1),
           st.floats(min_value=0.1, max_value=5.0))
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_increasing_transform(self, seed, a):
        r = np.random.default_rng(seed)
        scores = r.normal(size=12)
        labels = np.array([1, 0] * 6)
        transformed = np.exp(a * scores)  # strictly increasing
        assert auroc(scores, labels) == auroc(transformed, labels)

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_negation_complement(self, seed):
        r = np.random.default_rng(seed)
        scores = r.permutation(np.arange(10)).astype(float)  # tie-free
        labels = np.array([1, 0] * 5)
        assert auroc(scores, labels) + auroc(-scores, labels) == pytest.approx(
            1.0, abs=1e-12
        )


class TestPerClassReport:
    def test_perfect_two_class(self):
        scores = np.array([[0.9, 0.1], [0.8, 0.2], [0.1, 0.9], [0.2, 0.8]])
        rep = per_class_report(scores, [0, 0, 1, 1])
        assert rep.per_class_auc == [1.0, 1.0]
        assert rep.weighted_auc == 1.0

    def test_random_scores_near_half(self):
        r = np.random.default_rng(77)
        scores = r.random((1000, 3))
        labels = r.integers(0, 3, size=1000)
        rep = per_class_report(scores, labels)
        for a in rep.per_class_auc:
            assert abs(a - 0.5) < 0.05

    def test_hand_weighting(self):
        assert weighted_average([1.0, 0.5], [2, 8]) == pytest.approx(0.6)

    def test_absent_class_excluded_with_warning(self):
        scores = np.array([[0.7, 0.2, 0.1], [0.2, 0.7, 0.1],
                           [0.6, 0.3, 0.1], [0.1, 0.8, 0.1]])
        with pytest.warns(UserWarning, match="class 2"):
            rep = per_class_report(scores, [0, 1, 0, 1])
        assert math.isnan(rep.per_class_auc[2])
        assert not math.isnan(rep.weighted_auc)

    def test_weighted_between_min_and_max(self, rng):
        for _ in range(10):
            scores = rng.random((60, 4))
            labels = rng.integers(0, 4, size=60)
            rep = per_class_report(scores, labels)
            aucs = [a for a in rep.per_class_auc if not math.isnan(a)]
            assert min(aucs) - 1e-12 <= rep.weighted_auc <= max(aucs) + 1e-12


def delong_oracle(scores_a, scores_b, labels):
    """Explicit placement-value tables, no shared code with the library."""
    pos_a = [s for s, y in zip(scores_a, labels) if y == 1]
    neg_a = [s for s, y in zip(scores_a, labels) if y == 0]
    pos_b = [s for s, y in zip(scores_b, labels) if y == 1]
    neg_b = [s for s, y in zip(scores_b, labels) if y == 0]
    m, n = len(pos_a), len(neg_a)

    def placements(pos, neg):
        v10 = [sum((p > q) + 0.5 * (p == q) for q in neg) / n for p in pos]
        v01 = [sum((p > q) + 0.5 * (p == q) for p in pos) / m for q in neg]
        return v10, v01

    v10a, v01a = placements(pos_a, neg_a)
    v10b, v01b = placements(pos_b, neg_b)
    auc_a = sum(v10a) / m
    auc_b = sum(v10b) / m

    def cov(xs, ys):
        mx = sum(xs) / len(xs)
        my = sum(ys) / len(ys)
        return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / (len(xs) - 1)

    var = (
        cov(v10a, v10a) / m
        + cov(v10b, v10b) / m
        - 2 * cov(v10a, v10b) / m
        + cov(v01a, v01a) / n
        + cov(v01b, v01b) / n
        - 2 * cov(v01a, v01b) / n
    )
    z = (auc_a - auc_b) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return auc_a, auc_b, p


class TestDelong:
    LABELS = [1, 1, 1, 0, 0, 0]
    A = [0.9, 0.7, 0.4, 0.6, 0.3, 0.1]
    B = [0.8, 0.5, 0.45, 0.7, 0.2, 0.05]

    def test_identical_classifiers_p_one(self):
        auc_a, auc_b, p = delong_test(self.A, self.A, self.LABELS)
        assert auc_a == auc_b
        assert p == 1.0

    def test_argument_swap_symmetric(self):
        _, _, p1 = delong_test(self.A, self.B, self.LABELS)
        _, _, p2 = delong_test(self.B, self.A, self.LABELS)
        assert p1 == p2

    def test_six_sample_hand_oracle(self):
        got = delong_test(self.A, self.B, self.LABELS)
        expected = delong_oracle(self.A, self.B, self.LABELS)
        for g, e in zip(got, expected):
            assert g == pytest.approx(e, abs=1e-12)

    def test_random_cases_match_oracle(self, rng):
        for _ in range(15):
            n = int(rng.integers(6, 40))
            labels = rng.integers(0, 2, size=n)
            if labels.sum() < 2 or labels.sum() > n - 2:
                continue
            a = rng.normal(size=n) + labels
            b = rng.normal(size=n) + 0.5 * labels
            got = delong_test(a, b, labels)
            expected = delong_oracle(list(a), list(b), list(labels))
            for g, e in zip(got, expected):
                assert g == pytest.approx(e, abs=1e-10)

    def test_degenerate_variance_with_unequal_aucs(self):
        # both classifiers perfectly separate with zero placement spread
        labels = [1, 1, 0, 0]
        a = [1.0, 1.0, 0.0, 0.0]
        b = [0.0, 0.0, 1.0, 1.0]
        with pytest.raises(DegenerateVarianceError):
            delong_test(a, b, labels)

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="4"):
            delong_test([1.0, 0.0], [0.5, 0.4], [1, 0])

    def test_p_in_unit_interval(self, rng):
        for _ in range(10):
            labels = np.array([1] * 5 + [0] * 5)
            a = rng.normal(size=10)
            b = rng.normal(size=10)
            _, _, p = delong_test(a, b, labels)
            assert 0.0 < p <= 1.0
