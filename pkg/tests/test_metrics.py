"""Group accuracies and margin diagnostics."""

import math

import numpy as np
import pytest

from metrics.groups import gba, minority_group_accuracy, overall_accuracy, per_group_accuracy, worst_group_accuracy
from metrics.margins import example_margin, example_margins, group_margins
from utils.error_handlers import ShapeError, ValidationError


def _two_class_logits(margins, labels):
    """Logits whose example margins are exactly `margins`."""
    logits = np.zeros((len(margins), 2))
    logits[np.arange(len(margins)), labels] = margins
    return logits


class TestGroupAccuracy:

    def test_gba_is_unweighted_mean(self):
        assert gba({(0, 0): 1.0, (0, 1): 1.0, (1, 0): 1.0, (1, 1): 1.0}) == 1.0
        per_group = {(0, 0): 1.0, (0, 1): 0.5, (1, 0): 0.5, (1, 1): 1.0}
        assert gba(per_group) == 0.75
        assert worst_group_accuracy(per_group) == 0.5

    def test_empty_map(self):
        with pytest.raises(ValidationError):
            gba({})
        with pytest.raises(ValidationError):
            worst_group_accuracy({})

    def test_per_group_accuracy_and_counts(self):
        labels = np.array([0, 0, 0, 1, 1])
        attrs = np.array([0, 0, 1, 1, 0])
        predictions = np.array([0, 1, 1, 1, 0])
        accuracy, counts = per_group_accuracy(predictions, labels, attrs)
        assert accuracy == {(0, 0): 0.5, (0, 1): 0.0, (1, 0): 0.0, (1, 1): 1.0}
        assert counts == {(0, 0): 2, (0, 1): 1, (1, 0): 1, (1, 1): 1}

    def test_gba_differs_from_overall_on_skewed_groups(self):
        # 99 majority samples all right, 1 minority sample wrong, per class
        labels = np.repeat([0, 1], 100)
        attrs = np.concatenate([np.repeat(0, 99), [1], np.repeat(1, 99), [0]])
        predictions = attrs.copy()
        accuracy, _ = per_group_accuracy(predictions, labels, attrs)
        assert overall_accuracy(predictions, labels) == pytest.approx(0.99)
        assert gba(accuracy) == pytest.approx(0.5)

    def test_gba_ignores_group_sizes(self, rng):
        labels = rng.integers(2, size=200)
        attrs = rng.integers(2, size=200)
        predictions = rng.integers(2, size=200)
        base = gba(per_group_accuracy(predictions, labels, attrs)[0])

        group = (labels == 1) & (attrs == 0)
        doubled = [np.concatenate([v, v[group]]) for v in (predictions, labels, attrs)]
        assert gba(per_group_accuracy(*doubled)[0]) == pytest.approx(base, abs=1e-12)

    def test_random_classifier_scores_one_over_l(self):
        rng = np.random.default_rng(0)
        n, n_classes = 20000, 4
        labels = rng.integers(n_classes, size=n)
        attrs = rng.integers(n_classes, size=n)
        predictions = rng.integers(n_classes, size=n)
        accuracy, counts = per_group_accuracy(predictions, labels, attrs)
        p = 1.0 / n_classes
        sigma = math.sqrt(sum(p * (1 - p) / c for c in counts.values())) / len(counts)
        assert abs(gba(accuracy) - p) < 3 * sigma

    def test_missing_groups_are_logged(self, caplog):
        accuracy, _ = per_group_accuracy(np.array([0]), np.array([0]), np.array([0]),
                                         expected_groups=[(0, 0), (0, 1)])
        assert list(accuracy) == [(0, 0)]
        assert 'Excluding 1 empty groups' in caplog.text

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            per_group_accuracy(np.zeros(3), np.zeros(2), np.zeros(2))

    def test_overall_accuracy_of_empty_split(self):
        with pytest.raises(ValidationError):
            overall_accuracy(np.array([]), np.array([]))

    def test_minority_group_accuracy(self):
        per_group = {(0, 0): 1.0, (0, 1): 0.2, (1, 0): 0.4, (1, 1): 0.9}
        assert minority_group_accuracy(per_group, lambda y, a: y == a) == pytest.approx(0.3)
        assert minority_group_accuracy({(0, 0): 1.0}, lambda y, a: True) is None


class TestMargins:

    def test_example_margin(self):
        assert example_margin([3.0, 1.0, 0.0], 0) == 2.0
        assert example_margin([0.0, 0.0], 0) == 0.0
        assert example_margin([1.0, 4.0], 0) == -3.0

    def test_example_margin_needs_two_classes(self):
        with pytest.raises(ValidationError):
            example_margin([1.0], 0)

    def test_batch_margins_match_single(self, rng):
        logits = rng.normal(size=(20, 5))
        labels = rng.integers(5, size=20)
        expected = [example_margin(logits[i], labels[i]) for i in range(20)]
        np.testing.assert_allclose(example_margins(logits, labels), expected)

    def test_shift_invariance(self, rng):
        logits = rng.normal(size=(10, 3))
        labels = rng.integers(3, size=10)
        np.testing.assert_allclose(example_margins(logits + 7.5, labels), example_margins(logits, labels),
                                   atol=1e-12)

    def test_ratio_of_means(self):
        labels = np.array([0, 0, 1, 1])
        logits = _two_class_logits([2.0, 2.0, 4.0, 4.0], labels)
        groups = np.array([[0, 0], [0, 0], [1, 0], [1, 0]])
        summary = group_margins(logits, labels, groups, np.array([True, True, False, False]))
        assert summary.majority_mean == 2.0
        assert summary.minority_mean == 4.0
        assert summary.ratio == 0.5

    def test_equal_margins_give_ratio_one(self):
        labels = np.array([0, 1, 0, 1])
        logits = _two_class_logits([1.5] * 4, labels)
        summary = group_margins(logits, labels, labels, np.array([True, True, False, False]))
        assert summary.ratio == 1.0

    def test_group_minimum(self):
        labels = np.array([0, 0, 0, 1])
        logits = _two_class_logits([1.0, -2.0, 3.0, 5.0], labels)
        groups = np.array([[0, 0], [0, 0], [0, 0], [1, 1]])
        summary = group_margins(logits, labels, groups, np.array([True, True, True, False]))
        assert summary.group_min[(0, 0)] == -2.0
        assert all(summary.group_min[(0, 0)] <= m for m in summary.per_example[:3])
        assert summary.majority_min == -2.0
        assert summary.minority_min == 5.0

    def test_signed_ratio(self):
        labels = np.array([0, 1])
        logits = _two_class_logits([3.0, -1.0], labels)
        summary = group_margins(logits, labels, labels, np.array([True, False]))
        assert summary.ratio == -3.0

    def test_zero_minority_mean(self):
        labels = np.array([0, 1])
        logits = _two_class_logits([3.0, 0.0], labels)
        summary = group_margins(logits, labels, labels, np.array([True, False]))
        assert summary.ratio == math.inf

    def test_all_zero_margins_give_ratio_one(self):
        labels = np.array([0, 1, 0, 1])
        logits = _two_class_logits([0.0] * 4, labels)
        summary = group_margins(logits, labels, labels, np.array([True, True, False, False]))
        assert summary.majority_mean == summary.minority_mean == 0.0
        assert summary.ratio == 1.0

    def test_empty_side_is_named(self):
        labels = np.array([0, 1])
        with pytest.raises(ValidationError) as info:
            group_margins(_two_class_logits([1.0, 1.0], labels), labels, labels, np.array([True, True]))
        assert info.value.details['side'] == 'minority'

    def test_csv_row(self):
        labels = np.array([0, 1])
        summary = group_margins(_two_class_logits([2.0, 1.0], labels), labels, labels, np.array([True, False]))
        assert list(summary.as_row()) == ['majority_mean', 'minority_mean', 'ratio', 'majority_min',
                                          'minority_min']
