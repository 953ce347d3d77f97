"""
Group prior estimation P̂(y, a) from the ERM branch.

Each sample contributes its attribute posterior to row y of an L x K table.
The table is refreshed per batch (BatchAvg), smoothed across batches
(MovingAvg), or accumulated over an epoch and swapped in at its end
(DatasetAvg).
"""

import csv
import io
import logging
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from debias.topology import CorrelationTopology, attribute_posterior
from losses.objectives import PRIOR_FLOOR
from numerics.tensor import Tensor
from utils.error_handlers import ValidationError, error_handler

logger = logging.getLogger(__name__)


class PriorStrategy(str, Enum):
    DATASET_AVG = 'dataset'
    BATCH_AVG = 'batch'
    MOVING_AVG = 'moving'


class GroupPrior:
    """
    Estimated group probabilities with an update strategy.

    The training loop is the only writer; consumers read `snapshot()`.
    """

    def __init__(self, topology: CorrelationTopology, strategy: PriorStrategy = PriorStrategy.MOVING_AVG,
                 alpha: float = 0.5, per_sample: bool = False, frozen: bool = False):
        """
        Initialize a uniform prior.

        Args:
            topology: Label/attribute structure the posteriors follow
            strategy: How batch estimates enter the table
            alpha: Moving-average momentum, weight of the previous table
            per_sample: MovingAvg only; update entry (y, a_x) per sample instead of the whole table per batch
            frozen: Ignore all updates (fixed uniform prior)
        """
        if not 0.0 < alpha < 1.0:
            raise ValidationError(f"moving-average momentum must lie in (0, 1), got {alpha}")
        self.topology = topology
        self.strategy = PriorStrategy(strategy)
        self.alpha = float(alpha)
        self.per_sample = per_sample
        self.frozen = frozen

        L, K = topology.n_labels, topology.n_attrs
        self.table = np.full((L, K), 1.0 / (L * K))
        self._accum = np.zeros((L, K))
        self._accum_count = 0
        self.updates = 0
        self.skipped_batches = 0

    @classmethod
    def uniform(cls, topology: CorrelationTopology, **kwargs) -> 'GroupPrior':
        return cls(topology, **kwargs)

    @property
    def shape(self):
        return self.table.shape

    def batch_estimate(self, posteriors: Tensor, y: Tensor) -> np.ndarray:
        """
        Batch mean of per-sample contributions.

        Args:
            posteriors: (n, K) attribute posteriors
            y: (n,) labels

        Returns:
            (L, K) table where row y holds the mean of posteriors with that label, scaled by their share
        """
        posteriors = np.asarray(posteriors, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        estimate = np.zeros_like(self.table)
        np.add.at(estimate, y, posteriors)
        return estimate / max(len(y), 1)

    def update(self, erm_probs: Tensor, y: Tensor, split_weights: Optional[Tensor] = None,
               posteriors: Optional[Tensor] = None) -> 'GroupPrior':
        """
        Fold one batch of ERM outputs into the prior.

        Args:
            erm_probs: (n, L) ERM class probabilities
            y: (n,) labels
            split_weights: Optional (n, K) within-owner weights
            posteriors: Precomputed attribute posteriors, overrides erm_probs

        Returns:
            self
        """
        y = np.asarray(y, dtype=np.int64)
        if y.size == 0:
            self.skipped_batches += 1
            logger.warning("Empty batch passed to the group prior, update skipped")
            return self
        if self.frozen:
            return self

        if posteriors is None:
            posteriors = attribute_posterior(erm_probs, self.topology, split_weights)
        posteriors = np.atleast_2d(np.asarray(posteriors, dtype=np.float64))

        if self.strategy == PriorStrategy.DATASET_AVG:
            self._accum += self.batch_estimate(posteriors, y) * len(y)
            self._accum_count += len(y)
        elif self.strategy == PriorStrategy.BATCH_AVG:
            self.table = self.batch_estimate(posteriors, y)
        elif self.per_sample:
            attrs = np.argmax(posteriors, axis=1)
            a = self.alpha
            for yi, ai, post in zip(y, attrs, posteriors):
                self.table[yi, ai] = a * self.table[yi, ai] + (1.0 - a) * post[ai]
        else:
            self.table = self.alpha * self.table + (1.0 - self.alpha) * self.batch_estimate(posteriors, y)

        self.updates += 1
        return self

    def end_epoch(self) -> None:
        """Swap in the epoch estimate (DatasetAvg); no-op for the other strategies."""
        if self.strategy != PriorStrategy.DATASET_AVG or self.frozen:
            return
        if self._accum_count == 0:
            logger.warning("No samples accumulated this epoch, dataset prior unchanged")
            return
        self.table = self._accum / self._accum_count
        self._accum = np.zeros_like(self.table)
        self._accum_count = 0

    def snapshot(self) -> np.ndarray:
        """Read-only copy of the current table."""
        out = self.table.copy()
        out.setflags(write=False)
        return out

    def values(self, y: Tensor, attrs: Tensor) -> np.ndarray:
        """P̂(y_i, a_i) per sample."""
        return self.table[np.asarray(y, dtype=np.int64), np.asarray(attrs, dtype=np.int64)]

    def correction_rows(self, attrs: Tensor, floor_epsilon: float = PRIOR_FLOOR) -> np.ndarray:
        """(n, L) log offsets ln P̂(·, a_i), clamped at floor_epsilon."""
        columns = self.table[:, np.asarray(attrs, dtype=np.int64)].T
        return np.log(np.maximum(columns, floor_epsilon))

    def to_csv_text(self) -> str:
        return table_to_csv(self.table)

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Dump the table as `y,a,p_hat` rows."""
        path = Path(path)
        with error_handler():
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_csv_text())
        return path


def update_prior(prior: GroupPrior, erm_probs: Tensor, y: Tensor,
                 split_weights: Optional[Tensor] = None) -> GroupPrior:
    """Functional alias of GroupPrior.update."""
    return prior.update(erm_probs, y, split_weights)


def table_to_csv(table: Tensor) -> str:
    """`y,a,p_hat` rows of an L x K prior table."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['y', 'a', 'p_hat'])
    for (yi, ai), value in np.ndenumerate(np.asarray(table)):
        writer.writerow([yi, ai, repr(float(value))])
    return buffer.getvalue()
