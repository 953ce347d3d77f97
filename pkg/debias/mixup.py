"""
Group MixUp: blend each sample with a same-label minority sample and blend
its prior correction row accordingly.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from numerics.tensor import Tensor
from utils.error_handlers import ValidationError

logger = logging.getLogger(__name__)

LAMBDA_MODES = ('ramp', 'static')


@dataclass(frozen=True)
class MixupConfig:
    """
    Attributes:
        rampup_epochs: Epochs T until the ramp reaches its plateau
        enabled: Apply mixup during training
        lambda_mode: 'ramp' draws U(1-2tau, 1-tau); 'static' draws U(0.5, 1)
    """

    rampup_epochs: int = 2
    enabled: bool = True
    lambda_mode: str = 'ramp'

    def __post_init__(self):
        if self.rampup_epochs < 1:
            raise ValidationError(f"rampup_epochs must be at least 1, got {self.rampup_epochs}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ValidationError(f"lambda_mode must be one of {LAMBDA_MODES}, got {self.lambda_mode}")


@dataclass
class MixupBatch:
    """Output of group_mixup."""

    x: np.ndarray
    y: np.ndarray
    prior_rows: np.ndarray
    lam: float
    partners: np.ndarray
    partner_attrs: np.ndarray

    @property
    def n_mixed(self) -> int:
        return int(np.sum(self.partners >= 0))


def mixup_ramp(epoch: int, rampup_epochs: int) -> float:
    """tau = 0.5 * exp(-5 * (1 - min(epoch / T, 1))^2)."""
    if epoch < 0:
        raise ValidationError(f"epoch must be non-negative, got {epoch}")
    if rampup_epochs < 1:
        raise ValidationError(f"rampup_epochs must be at least 1, got {rampup_epochs}")
    progress = min(epoch / rampup_epochs, 1.0)
    return 0.5 * math.exp(-5.0 * (1.0 - progress) ** 2)


def sample_lambda(tau: float, rng: np.random.Generator, mode: str = 'ramp') -> float:
    """One mixing coefficient per batch."""
    if mode == 'static':
        return float(rng.uniform(0.5, 1.0))
    return float(rng.uniform(1.0 - 2.0 * tau, 1.0 - tau))


def group_mixup(x: Tensor, y: Tensor, attrs: Tensor, pool_x: Tensor, pool_y: Tensor, pool_attrs: Tensor,
                prior_table: Tensor, tau: float, rng: np.random.Generator, mode: str = 'ramp',
                lam: Optional[float] = None) -> MixupBatch:
    """
    Mix every sample with a random same-label minority sample.

    Args:
        x: (n, d) inputs
        y: (n,) labels
        attrs: (n,) inferred attributes a_x
        pool_x: (m, d) minority pool inputs
        pool_y: (m,) minority pool labels
        pool_attrs: (m,) inferred attributes of the pool
        prior_table: (L, K) current group prior
        tau: Ramp value for this epoch
        rng: Mixup random stream
        mode: Lambda distribution, see MixupConfig
        lam: Fixed coefficient, bypasses sampling

    Returns:
        MixupBatch with mixed inputs, unchanged labels and blended prior rows.
        Samples without a same-label partner pass through with lambda 1.
    """
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.int64)
    attrs = np.asarray(attrs, dtype=np.int64)
    pool_y = np.asarray(pool_y, dtype=np.int64)
    table = np.asarray(prior_table, dtype=np.float64)

    if lam is None:
        lam = sample_lambda(tau, rng, mode)

    n = len(y)
    partners = np.full(n, -1, dtype=np.int64)
    for label in np.unique(y):
        members = np.flatnonzero(y == label)
        candidates = np.flatnonzero(pool_y == label)
        if candidates.size == 0:
            continue
        partners[members] = candidates[rng.integers(0, candidates.size, size=members.size)]

    mixed = partners >= 0
    partner_attrs = attrs.copy()
    partner_attrs[mixed] = np.asarray(pool_attrs, dtype=np.int64)[partners[mixed]]

    out_x = x.copy()
    rows = table[:, attrs].T.copy()
    if mixed.any():
        weight = np.asarray(lam, dtype=x.dtype)
        out_x[mixed] = weight * x[mixed] + (1 - weight) * np.asarray(pool_x)[partners[mixed]]
        rows[mixed] = lam * table[:, attrs[mixed]].T + (1.0 - lam) * table[:, partner_attrs[mixed]].T
    elif n:
        logger.debug("No minority partners for any label in this batch, mixup skipped")

    return MixupBatch(out_x, y, rows, float(lam), partners, partner_attrs)
