import numpy as np
import pytest

from injurylab.metrics import (OperatingPoint, auc, binomial_sign_test_p,
                               operating_metrics, optimal_operating_point,
                               rank_biserial, roc_curve, subgroup_auc)


def brute_force_auc(scores, labels):
    """O(n^2) pairwise concordance with half-weighted ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
            # ties share half credit, the Mann-Whitney convention
                total += 0.5
    return total / (pos.size * neg.size)


def random_fixture(rng, n_max=80, tie_prob=0.5):
    n = int(rng.integers(4, n_max))
    if rng.random() < tie_prob:
        scores = rng.integers(0, 6, size=n).astype(float)  # heavy ties
    else:
        scores = rng.normal(size=n)
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1   # both classes present
    return scores, labels


class TestAuc:
    def test_four_point_fixture(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_perfect_separation(self):
        assert auc([1, 2, 3, 10, 11], [0, 0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert auc(np.ones(20), np.r_[np.ones(5), np.zeros(15)]) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="both classes"):
            auc([0.1, 0.2], [1, 1])

    def test_matches_brute_force(self, rng):
        for _ in range(200):
            scores, labels = random_fixture(rng)
            assert auc(scores, labels) == pytest.approx(
                brute_force_auc(scores, labels), abs=1e-12)

    def test_invariant_under_monotone_transforms(self, rng):
        scores, labels = random_fixture(rng, tie_prob=0.0)
        base = auc(scores, labels)
        assert auc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
        assert auc(3.0 * scores + 11.0, labels) == pytest.approx(base, abs=1e-12)


class TestRocCurve:
    def test_four_point_sweep(self):
        curve = roc_curve([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        points = list(zip(curve.fpr.tolist(), curve.tpr.tolist()))
        assert points == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        assert curve.thresholds[0] == np.inf

    def test_endpoints_exact(self, rng):
        scores, labels = random_fixture(rng)
        curve = roc_curve(scores, labels)
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
        assert np.all(np.diff(curve.fpr) >= 0)
        assert np.all(np.diff(curve.tpr) >= 0)

    def test_area_equals_auc(self, rng):
        for _ in range(100):
            scores, labels = random_fixture(rng)
            curve = roc_curve(scores, labels)
            assert curve.area() == pytest.approx(auc(scores, labels), abs=1e-12)

    def test_reversed_scores_mirror(self, rng):
        scores, labels = random_fixture(rng)
        assert roc_curve(-scores, labels).area() == pytest.approx(
            1.0 - auc(scores, labels), abs=1e-12)

    def test_two_point_extremes(self):
        assert roc_curve([2.0, 1.0], [1, 0]).area() == 1.0
        assert roc_curve([1.0, 2.0], [1, 0]).area() == 0.0


class TestOperatingMetrics:
    PREVALENCE = 13 / 4664

    def test_moderate_risk_row(self):
        point = operating_metrics(0.54, 0.11, self.PREVALENCE)
        assert round(point.lr_pos, 1) == 4.9          # reported as 5.0
        assert round(point.lr_neg, 2) == 0.52
        assert round(point.p_injury_given_pos, 3) == 0.014
        assert round(point.p_injury_given_neg, 4) == 0.0014

    def test_infinite_lr_pos_at_zero_fpr(self):
        point = operating_metrics(0.5, 0.0, 0.01)
        assert point.lr_pos == np.inf

    def test_probabilities_in_unit_interval(self, rng):
        for _ in range(50):
            tpr, fpr = rng.random(), rng.random()
            point = operating_metrics(tpr, fpr, 0.02, cost_ratio=100.0)
            assert 0.0 <= point.p_injury_given_pos <= 1.0 or np.isnan(point.p_injury_given_pos)
            assert 0.0 <= point.p_injury_given_neg <= 1.0 or np.isnan(point.p_injury_given_neg)

    def test_prevalence_validated(self):
        with pytest.raises(ValueError):
            operating_metrics(0.5, 0.5, 0.0)


class TestOptimalOperatingPoint:
    def test_cost_is_minimal_over_curve(self, rng):
        for _ in range(40):
            scores, labels = random_fixture(rng)
            curve = roc_curve(scores, labels)
            ratio = float(rng.choice([5, 50, 100, 1000]))
            prevalence = 0.02
            point = optimal_operating_point(curve, ratio, prevalence)
            costs = ratio * prevalence * (1 - curve.tpr) + (1 - prevalence) * curve.fpr
            assert point.expected_cost <= costs.min() + 1e-12

    def test_huge_cost_ratio_selects_full_sensitivity(self, rng):
        scores, labels = random_fixture(rng)
        curve = roc_curve(scores, labels)
        point = optimal_operating_point(curve, 1e9, 0.01)
        assert point.tpr == 1.0

    def test_tie_resolves_to_lower_fpr(self):
        # with zero-weight on false positives impossible; craft exact tie instead:
        # points (0,0) and (1,1) tie when ratio*p = (1-p)
        curve = roc_curve([1.0, 2.0], [0, 1])
        prevalence = 0.5
        point = optimal_operating_point(curve, 1.0, prevalence)
        # (0,0), (0,1), (1,1) all cost .5, .0, .5 -> unique min at (0,1) anyway
        assert (point.fpr, point.tpr) == (0.0, 1.0)
        # force the tie between (0,0) and (1,1): single score value
        tie_curve = roc_curve([1.0, 1.0], [0, 1])
        tie_point = optimal_operating_point(tie_curve, 1.0, 0.5)
        assert tie_point.fpr == 0.0

    def test_monotone_in_cost_ratio(self, rng):
        for _ in range(60):
            scores, labels = random_fixture(rng)
            curve = roc_curve(scores, labels)
            prevalence = float(rng.uniform(0.001, 0.2))
            previous = None
            for ratio in (50.0, 100.0, 1000.0):
                point = optimal_operating_point(curve, ratio, prevalence)
                if previous is not None:
                    assert point.tpr >= previous.tpr - 1e-15
                    assert point.fpr >= previous.fpr - 1e-15
                previous = point


class TestSubgroupAuc:
    def test_constant_group_flag(self):
        scores = [0.1, 0.9, 0.4, 0.6]
        labels = [0, 1, 0, 1]
        result = subgroup_auc(scores, labels, [True] * 4)
        assert result[True].auc == 1.0
        assert result[False].note == "empty group"
        assert result[False].auc is None

    def test_identical_multisets_equal_auc(self):
        scores = [0.1, 0.9, 0.1, 0.9]
        labels = [0, 1, 0, 1]
        group = [True, True, False, False]
        result = subgroup_auc(scores, labels, group)
        assert result[True].auc == result[False].auc

    def test_small_positive_count_carries_note(self, rng):
        scores = rng.normal(size=40)
        labels = np.zeros(40, dtype=int)
        labels[:3] = 1
        group = np.ones(40, dtype=bool)
        result = subgroup_auc(scores, labels, group)
        assert result[True].n_pos == 3
        assert "3 positives" in result[True].note

    def test_single_class_group_reported_insufficient(self):
        result = subgroup_auc([0.5, 0.2, 0.8], [1, 0, 0],
                              [True, False, False])
        assert result[True].auc is None
        assert result[True].note == "insufficient data"


class TestRankBiserial:
    def test_complete_dominance(self):
        assert rank_biserial([5, 6, 7], [1, 2, 3]) == 1.0

    def test_identical_distributions(self):
        assert rank_biserial([1, 2, 3], [1, 2, 3]) == 0.0

    def test_brute_force_fixture(self):
        # all 9 pairs of a=(1,2,3), b=(2,3,4): one win (3>2), two ties
        a, b = [1, 2, 3], [2, 3, 4]
        wins = sum(1.0 for x in a for z in b if x > z)
        ties = sum(0.5 for x in a for z in b if x == z)
        expected = 2.0 * ((wins + ties) / 9.0) - 1.0
        assert expected == pytest.approx(-5.0 / 9.0, abs=1e-12)
        assert rank_biserial(a, b) == pytest.approx(expected, abs=1e-12)

    def test_antisymmetry(self, rng):
        for _ in range(20):
            a = rng.integers(0, 8, size=12)
            b = rng.integers(0, 8, size=9)
            assert rank_biserial(a, b) == pytest.approx(-rank_biserial(b, a), abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            rank_biserial([], [1.0])


def test_binomial_sign_test():
    assert binomial_sign_test_p(20, 20) == pytest.approx(0.5 ** 20, abs=1e-18)
    assert binomial_sign_test_p(15, 20) == pytest.approx(0.02069473, abs=1e-8)
    assert binomial_sign_test_p(0, 20) == 1.0
