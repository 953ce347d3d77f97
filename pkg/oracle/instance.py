"""
Fully enumerated joint distributions P(x, y, a) over a small finite domain.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.error_handlers import ValidationError

logger = logging.getLogger(__name__)

MAX_DOMAIN = 12
JOINT_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteInstance:
    """
    Attributes:
        joint: (|X|, L, K) table of P(x, y, a)
        name: Label used in logs and CLI output
    """

    joint: np.ndarray
    name: str = ''

    def __post_init__(self):
        joint = np.array(self.joint, dtype=np.float64)
        if joint.ndim != 3:
            raise ValidationError(f"joint table must be |X| x L x K, got shape {joint.shape}")
        if not 1 <= joint.shape[0] <= MAX_DOMAIN:
            raise ValidationError(f"domain size must lie in [1, {MAX_DOMAIN}], got {joint.shape[0]}")
        if (joint < 0).any():
            raise ValidationError("joint table has negative entries")
        total = joint.sum()
        if abs(total - 1.0) > JOINT_TOLERANCE:
            raise ValidationError(f"joint table sums to {total!r}, expected 1")
        joint.setflags(write=False)
        object.__setattr__(self, 'joint', joint)

    @classmethod
    def from_unnormalized(cls, weights, name: str = '') -> 'DiscreteInstance':
        weights = np.asarray(weights, dtype=np.float64)
        return cls(weights / weights.sum(), name)

    @property
    def n_x(self) -> int:
        return self.joint.shape[0]

    @property
    def n_labels(self) -> int:
        return self.joint.shape[1]

    @property
    def n_attrs(self) -> int:
        return self.joint.shape[2]

    @property
    def p_x(self) -> np.ndarray:
        return self.joint.sum(axis=(1, 2))

    @property
    def group_prior(self) -> np.ndarray:
        """P(y, a), shape (L, K)."""
        return self.joint.sum(axis=0)

    @property
    def supported_groups(self) -> np.ndarray:
        """Boolean (L, K) mask of groups with positive mass."""
        return self.group_prior > 0

    def posterior(self, x: int) -> np.ndarray:
        """P(y, a | x), shape (L, K)."""
        p = self.p_x[x]
        if p <= 0:
            return np.zeros(self.joint.shape[1:])
        return self.joint[x] / p

    def attr_posterior(self, x: int) -> np.ndarray:
        return self.posterior(x).sum(axis=0)

    def label_posterior(self, x: int) -> np.ndarray:
        return self.posterior(x).sum(axis=1)

    @property
    def one_hot(self) -> bool:
        """True if every supported x carries exactly one attribute value."""
        for x in range(self.n_x):
            if self.p_x[x] > 0 and np.count_nonzero(self.attr_posterior(x)) != 1:
                return False
        return True

    def attribute_of(self, x: int) -> Optional[int]:
        """The single attribute of x under the one-hot condition, else None."""
        nonzero = np.flatnonzero(self.attr_posterior(x))
        return int(nonzero[0]) if nonzero.size == 1 else None


def random_instance(seed: int, n_x: int = 4, n_labels: int = 2, n_attrs: int = 2,
                    concentration: float = 1.0, one_hot: bool = True) -> DiscreteInstance:
    """
    Seeded symmetric-Dirichlet instance.

    With one_hot, every x keeps only its most probable attribute value and
    the table is renormalized.
    """
    rng = np.random.default_rng(seed)
    joint = rng.dirichlet(np.full(n_x * n_labels * n_attrs, concentration)).reshape(n_x, n_labels, n_attrs)
    if one_hot:
        keep = np.argmax(joint.sum(axis=1), axis=1)
        mask = np.zeros_like(joint, dtype=bool)
        mask[np.arange(n_x), :, keep] = True
        joint = np.where(mask, joint, 0.0)
    return DiscreteInstance.from_unnormalized(joint, name=f"random-{seed}")


def skewed_instance() -> DiscreteInstance:
    """
    Two classes, two attributes, four points where the plain Bayes classifier
    is not GBA-optimal: at x3 the rare group (0, 1) should win.
    """
    joint = np.zeros((4, 2, 2))
    joint[0, 0, 0], joint[0, 1, 0] = 0.43, 0.05
    joint[1, 0, 1], joint[1, 1, 1] = 0.02, 0.36
    joint[2, 0, 0], joint[2, 1, 0] = 0.02, 0.06
    joint[3, 0, 1], joint[3, 1, 1] = 0.02, 0.04
    return DiscreteInstance.from_unnormalized(joint, name='skewed')


def balanced_instance() -> DiscreteInstance:
    """Equal group priors: every surrogate agrees with the plain Bayes rule."""
    joint = np.zeros((4, 2, 2))
    joint[0, 0, 0], joint[0, 1, 0] = 0.20, 0.05
    joint[1, 0, 0], joint[1, 1, 0] = 0.05, 0.20
    joint[2, 0, 1], joint[2, 1, 1] = 0.20, 0.05
    joint[3, 0, 1], joint[3, 1, 1] = 0.05, 0.20
    return DiscreteInstance.from_unnormalized(joint, name='balanced')
