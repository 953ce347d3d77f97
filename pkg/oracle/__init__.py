"""Enumerable instances, the group-balanced Bayes rule and surrogate consistency."""

from oracle.instance import DiscreteInstance, balanced_instance, random_instance, skewed_instance
from oracle.bayes import (
    bayes_rule_prediction,
    brute_force_gba_max,
    disagreements,
    gba_of_classifier,
    plain_bayes_prediction,
    rule_decisions,
)
from oracle.consistency import ConsistencyResult, SurrogateMode, surrogate_consistency_check

__all__ = [
    'DiscreteInstance',
    'balanced_instance',
    'random_instance',
    'skewed_instance',
    'bayes_rule_prediction',
    'brute_force_gba_max',
    'disagreements',
    'gba_of_classifier',
    'plain_bayes_prediction',
    'rule_decisions',
    'ConsistencyResult',
    'SurrogateMode',
    'surrogate_consistency_check',
]
