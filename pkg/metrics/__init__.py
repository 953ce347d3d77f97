"""Group accuracies and margin diagnostics."""

from metrics.groups import (
    gba,
    minority_group_accuracy,
    overall_accuracy,
    per_group_accuracy,
    worst_group_accuracy,
)
from metrics.margins import MarginSummary, example_margin, example_margins, group_margins

__all__ = [
    'gba',
    'minority_group_accuracy',
    'overall_accuracy',
    'per_group_accuracy',
    'worst_group_accuracy',
    'MarginSummary',
    'example_margin',
    'example_margins',
    'group_margins',
]
