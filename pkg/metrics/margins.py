"""
Classification margins and their majority/minority aggregates.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from numerics.tensor import Tensor
from utils.error_handlers import ShapeError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarginSummary:
    """
    Attributes:
        per_example: Margin of every example
        group_min: Smallest margin m_g within each group
        majority_mean: Mean example margin over majority groups
        minority_mean: Mean example margin over minority groups
        majority_min: Mean of m_g over majority groups
        minority_min: Mean of m_g over minority groups
        ratio: majority_mean / minority_mean (signed, +-inf when only minority_mean is 0, 1 when the means are equal)
    """

    per_example: np.ndarray
    group_min: Dict[Tuple[int, int], float]
    majority_mean: float
    minority_mean: float
    majority_min: float
    minority_min: float
    ratio: float

    def as_row(self) -> Dict[str, float]:
        return {
            'majority_mean': self.majority_mean,
            'minority_mean': self.minority_mean,
            'ratio': self.ratio,
            'majority_min': self.majority_min,
            'minority_min': self.minority_min,
        }


def example_margin(logits: Tensor, y: int) -> float:
    """z_y - max_{j != y} z_j."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] < 2:
        raise ValidationError("example margin needs a logit vector with at least two classes")
    others = np.delete(z, int(y))
    return float(z[int(y)] - others.max())


def example_margins(logits: Tensor, labels: Tensor) -> np.ndarray:
    """Row-wise example margins for an (n, L) logit matrix."""
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValidationError("example margins need an (n, L) matrix with L >= 2")
    rows = np.arange(z.shape[0])
    own = z[rows, labels]
    masked = z.copy()
    masked[rows, labels] = -np.inf
    return own - masked.max(axis=1)


def group_margins(logits: Tensor, labels: Tensor, groups: Tensor, majority_mask: Tensor) -> MarginSummary:
    """
    Summarize margins by group and by majority/minority side.

    Args:
        logits: (n, L) model outputs
        labels: (n,) true classes
        groups: (n, 2) (y, a) pairs or (n,) integer group ids
        majority_mask: (n,) True for examples in spurious-aligned groups

    Returns:
        MarginSummary
    """
    margins = example_margins(logits, labels)
    majority_mask = np.asarray(majority_mask, dtype=bool)
    groups = np.asarray(groups)
    if majority_mask.shape != margins.shape or groups.shape[0] != margins.shape[0]:
        raise ShapeError("labels, groups and majority mask differ in length",
                         expected=margins.shape[0], actual=groups.shape[0])

    for side, mask in (('majority', majority_mask), ('minority', ~majority_mask)):
        if not mask.any():
            raise ValidationError(f"no examples on the {side} side for margin aggregation",
                                  details={'side': side})

    keys = [tuple(int(v) for v in np.atleast_1d(g)) for g in groups]
    group_min: Dict[Tuple[int, ...], float] = {}
    group_side: Dict[Tuple[int, ...], bool] = {}
    for key, m, is_major in zip(keys, margins, majority_mask):
        if key not in group_min or m < group_min[key]:
            group_min[key] = float(m)
        group_side[key] = bool(is_major)

    majority_mean = float(margins[majority_mask].mean())
    minority_mean = float(margins[~majority_mask].mean())
    majority_min = float(np.mean([v for k, v in group_min.items() if group_side[k]]))
    minority_min = float(np.mean([v for k, v in group_min.items() if not group_side[k]]))

    if majority_mean == minority_mean:
        ratio = 1.0
    elif minority_mean == 0.0:
        logger.warning("Minority mean margin is zero, margin ratio is infinite")
        ratio = math.copysign(math.inf, majority_mean)
    else:
        ratio = majority_mean / minority_mean

    return MarginSummary(margins, group_min, majority_mean, minority_mean, majority_min, minority_min, ratio)
