"""
Group-level accuracy: per-group, group-balanced, worst-group and minority.
"""

import logging
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from numerics.tensor import Tensor
from utils.error_handlers import ShapeError, ValidationError

logger = logging.getLogger(__name__)

Group = Tuple[int, int]  # (y, a)


def per_group_accuracy(predictions: Tensor, labels: Tensor, attrs: Tensor,
                       expected_groups: Optional[Iterable[Group]] = None) -> Tuple[Dict[Group, float], Dict[Group, int]]:
    """
    Accuracy and sample count of every (y, a) group.

    Args:
        predictions: (n,) predicted classes
        labels: (n,) true classes
        attrs: (n,) true attributes
        expected_groups: Groups that should be present; missing ones are logged and excluded

    Returns:
        Tuple of (accuracy by group, count by group), for non-empty groups only
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels, dtype=np.int64)
    attrs = np.asarray(attrs, dtype=np.int64)
    if not (predictions.shape == labels.shape == attrs.shape):
        raise ShapeError("predictions, labels and attributes differ in length",
                         expected=list(labels.shape), actual=list(predictions.shape))

    correct = predictions == labels
    accuracy: Dict[Group, float] = {}
    counts: Dict[Group, int] = {}
    for y, a in sorted(set(zip(labels.tolist(), attrs.tolist()))):
        mask = (labels == y) & (attrs == a)
        counts[(y, a)] = int(mask.sum())
        accuracy[(y, a)] = float(correct[mask].mean())

    if expected_groups is not None:
        empty = [g for g in expected_groups if g not in counts]
        if empty:
            logger.warning(f"Excluding {len(empty)} empty groups from group metrics: {empty}")

    return accuracy, counts


def gba(per_group: Mapping[Group, float]) -> float:
    """Group-balanced accuracy: unweighted mean over groups."""
    if not per_group:
        raise ValidationError("group-balanced accuracy of an empty group map")
    return float(np.mean(list(per_group.values())))


def worst_group_accuracy(per_group: Mapping[Group, float]) -> float:
    if not per_group:
        raise ValidationError("worst-group accuracy of an empty group map")
    return float(min(per_group.values()))


def overall_accuracy(predictions: Tensor, labels: Tensor) -> float:
    """Sample-weighted accuracy."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise ValidationError("accuracy of an empty split")
    return float(np.mean(predictions == labels))


def minority_group_accuracy(per_group: Mapping[Group, float], aligned) -> Optional[float]:
    """
    Mean accuracy over bias-conflicting groups.

    Args:
        per_group: Accuracy by (y, a)
        aligned: Callable (y, a) -> bool telling whether a group is spurious-aligned

    Returns:
        Mean over minority groups, or None if there are none
    """
    values = [acc for (y, a), acc in per_group.items() if not aligned(y, a)]
    if not values:
        return None
    return float(np.mean(values))
