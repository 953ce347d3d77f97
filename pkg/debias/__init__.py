"""Attribute inference, group-prior estimation and Group MixUp."""

from debias.topology import (
    AttributeSplitter,
    CorrelationTopology,
    TopologyKind,
    attribute_posterior,
    infer_attribute,
    is_minority,
)
from debias.prior import GroupPrior, PriorStrategy, update_prior
from debias.mixup import MixupBatch, MixupConfig, group_mixup, mixup_ramp, sample_lambda

__all__ = [
    'AttributeSplitter',
    'CorrelationTopology',
    'TopologyKind',
    'attribute_posterior',
    'infer_attribute',
    'is_minority',
    'GroupPrior',
    'PriorStrategy',
    'update_prior',
    'MixupBatch',
    'MixupConfig',
    'group_mixup',
    'mixup_ramp',
    'sample_lambda',
]
