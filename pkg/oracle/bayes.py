"""
Group-balanced Bayes rule and exhaustive GBA maximization.
"""

import itertools
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from numerics.tensor import argmax_first
from oracle.instance import DiscreteInstance
from utils.error_handlers import EnumerationError, ValidationError

logger = logging.getLogger(__name__)

ENUMERATION_BOUND = 10 ** 6
TIE_TOLERANCE = 1e-12

Classifier = Tuple[int, ...]


def rule_scores(instance: DiscreteInstance, x: int, prior: Optional[np.ndarray] = None) -> np.ndarray:
    """
    sum_a P(y, a | x) / P(y, a) for every class y.

    Args:
        instance: Joint distribution
        x: Domain point
        prior: Group prior to divide by; defaults to the instance's own P(y, a)
    """
    prior = instance.group_prior if prior is None else np.asarray(prior, dtype=np.float64)
    posterior = instance.posterior(x)
    bad = (prior <= 0) & (posterior > 0)
    if bad.any():
        y, a = (int(v) for v in np.argwhere(bad)[0])
        raise ValidationError(f"group ({y}, {a}) has zero prior but positive posterior at x={x}")
    ratio = np.divide(posterior, prior, out=np.zeros_like(posterior), where=prior > 0)
    return ratio.sum(axis=1)


def bayes_rule_prediction(instance: DiscreteInstance, x: int, prior: Optional[np.ndarray] = None) -> int:
    """argmax_y sum_a P(y, a | x) / P(y, a), smallest index on ties."""
    return argmax_first(rule_scores(instance, x, prior))


def plain_bayes_prediction(instance: DiscreteInstance, x: int) -> int:
    """argmax_y P(y | x)."""
    return argmax_first(instance.label_posterior(x))


def rule_decisions(instance: DiscreteInstance) -> Classifier:
    return tuple(bayes_rule_prediction(instance, x) for x in range(instance.n_x))


def disagreements(instance: DiscreteInstance) -> List[int]:
    """Points where the plain Bayes classifier and the balanced rule differ."""
    return [x for x in range(instance.n_x)
            if instance.p_x[x] > 0 and plain_bayes_prediction(instance, x) != bayes_rule_prediction(instance, x)]


def _contributions(instance: DiscreteInstance) -> np.ndarray:
    """(|X|, L) table of sum_a P(x, y, a) / P(y, a) over supported groups."""
    prior = instance.group_prior
    ratio = np.divide(instance.joint, prior[None], out=np.zeros_like(instance.joint), where=prior[None] > 0)
    return ratio.sum(axis=2)


def gba_of_classifier(instance: DiscreteInstance, decisions: Sequence[int]) -> float:
    """
    Exact group-balanced accuracy of a deterministic classifier X -> Y.

    Groups with zero mass are left out of the average.
    """
    decisions = np.asarray(decisions, dtype=np.int64)
    if decisions.shape != (instance.n_x,):
        raise ValidationError(f"classifier must assign all {instance.n_x} points")
    n_groups = int(instance.supported_groups.sum())
    contrib = _contributions(instance)
    return float(contrib[np.arange(instance.n_x), decisions].sum() / n_groups)


def brute_force_gba_max(instance: DiscreteInstance) -> Tuple[List[Classifier], float]:
    """
    Enumerate every deterministic classifier and keep the GBA maximizers.

    Returns:
        Tuple of (all maximizing classifiers, maximum GBA)
    """
    n_classifiers = instance.n_labels ** instance.n_x
    if n_classifiers > ENUMERATION_BOUND:
        raise EnumerationError(
            f"{n_classifiers} classifiers exceed the enumeration bound {ENUMERATION_BOUND}; "
            f"use a smaller domain or fewer classes",
            details={'n_classifiers': n_classifiers})

    contrib = _contributions(instance)
    n_groups = int(instance.supported_groups.sum())
    xs = range(instance.n_x)

    best = -np.inf
    maximizers: List[Classifier] = []
    for decisions in itertools.product(range(instance.n_labels), repeat=instance.n_x):
        value = sum(contrib[x, decisions[x]] for x in xs) / n_groups
        if value > best + TIE_TOLERANCE:
            best = value
            maximizers = [decisions]
        elif value >= best - TIE_TOLERANCE:
            maximizers.append(decisions)

    logger.debug(f"Enumerated {n_classifiers} classifiers for {instance.name or 'instance'}, "
                 f"{len(maximizers)} maximizers at GBA {best:.6f}")
    return maximizers, float(best)
