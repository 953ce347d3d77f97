"""
Group-level evaluation of a trained scorer.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from debias.topology import CorrelationTopology
from metrics.groups import (
    gba,
    minority_group_accuracy,
    overall_accuracy,
    per_group_accuracy,
    worst_group_accuracy,
)
from metrics.margins import MarginSummary, group_margins
from model.mlp import MlpScorer
from numerics.tensor import Tensor, argmax_first
from utils.error_handlers import ValidationError

logger = logging.getLogger(__name__)

Group = Tuple[int, int]

EVAL_CHUNK = 8192


@dataclass
class SplitMetrics:
    """Accuracy metrics of one split."""

    per_group: Dict[Group, float]
    counts: Dict[Group, int]
    gba: float
    worst_group: float
    overall: float
    minority: Optional[float]


@dataclass
class EpochRecord:
    """Everything measured at the end of one epoch."""

    epoch: int
    test: SplitMetrics
    erm_loss: float
    robust_loss: float
    test_margins: Optional[MarginSummary] = None
    train_margins: Optional[MarginSummary] = None
    samples_mixed: int = 0
    seconds: float = 0.0
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def gba(self) -> float:
        return self.test.gba

    @property
    def worst_group(self) -> float:
        return self.test.worst_group


def batched_logits(model: MlpScorer, x: Tensor, chunk: int = EVAL_CHUNK) -> np.ndarray:
    """Raw logits without keeping activations, in chunks."""
    x = np.asarray(x)
    if len(x) == 0:
        return np.zeros((0, model.n_classes), dtype=model.dtype)
    return np.vstack([model.predict(x[i:i + chunk]) for i in range(0, len(x), chunk)])


def evaluate(model: MlpScorer, x: Tensor, y: Tensor, a: Tensor,
             topology: Optional[CorrelationTopology] = None,
             logits: Optional[np.ndarray] = None) -> SplitMetrics:
    """
    Per-group accuracy, GBA and worst group of argmax(raw logits).

    Args:
        model: Scorer to evaluate
        x: (n, d) inputs
        y: (n,) labels
        a: (n,) attributes
        topology: Enables the minority-group accuracy and the empty-group check
        logits: Precomputed logits, skips the forward pass

    Returns:
        SplitMetrics over the non-empty groups
    """
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValidationError("cannot evaluate an empty split")
    if logits is None:
        logits = batched_logits(model, x)
    predictions = argmax_first(logits, axis=1)

    expected = None
    if topology is not None:
        expected = [(yi, ai) for yi in range(topology.n_labels) for ai in range(topology.n_attrs)]
    accuracy, counts = per_group_accuracy(predictions, y, a, expected)

    minority = None
    if topology is not None:
        minority = minority_group_accuracy(accuracy, lambda gy, ga: bool(topology.is_aligned(gy, ga)))

    return SplitMetrics(
        per_group=accuracy,
        counts=counts,
        gba=gba(accuracy),
        worst_group=worst_group_accuracy(accuracy),
        overall=overall_accuracy(predictions, y),
        minority=minority,
    )


def margin_summary(logits: np.ndarray, y: Tensor, a: Tensor,
                   topology: CorrelationTopology) -> Optional[MarginSummary]:
    """Majority/minority margins, or None when one side has no examples."""
    y = np.asarray(y, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    majority = np.asarray(topology.is_aligned(y, a), dtype=bool)
    if majority.all() or not majority.any():
        logger.debug("Margins skipped, one side of the split is empty")
        return None
    return group_margins(logits, y, np.stack([y, a], axis=1), majority)
