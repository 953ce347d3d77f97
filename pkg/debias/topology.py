"""
Correlation topologies between class labels and spurious attribute values.

Every topology is expressed through one mechanism: labels are first merged
into "owners" (label_to_attr), then each owner's probability mass is split
across the attribute values it owns (attr_multiplicity). Owned attributes are
contiguous: owner o holds attributes [start_o, start_o + multiplicity_o).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from numerics.tensor import Tensor, argmax_first
from utils.error_handlers import TopologyError

logger = logging.getLogger(__name__)


class TopologyKind(str, Enum):
    ONE_TO_ONE = 'one_to_one'
    MANY_TO_ONE = 'many_to_one'
    ONE_TO_MANY = 'one_to_many'
    MANY_TO_MANY = 'many_to_many'

    @property
    def code(self) -> int:
        return _KIND_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> 'TopologyKind':
        for kind, value in _KIND_CODES.items():
            if value == code:
                return kind
        raise TopologyError(f"unknown topology code {code}")


_KIND_CODES = {
    TopologyKind.ONE_TO_ONE: 0,
    TopologyKind.MANY_TO_ONE: 1,
    TopologyKind.ONE_TO_MANY: 2,
    TopologyKind.MANY_TO_MANY: 3,
}


@dataclass(frozen=True)
class CorrelationTopology:
    """
    Declared label/attribute structure.

    Attributes:
        kind: Topology family
        n_labels: Number of classes L
        n_attrs: Number of attribute values K
        label_to_attr: Owner index of every label (identity unless labels are merged)
        attr_multiplicity: Number of attribute values held by every owner
    """

    kind: TopologyKind
    n_labels: int
    n_attrs: int
    label_to_attr: Tuple[int, ...]
    attr_multiplicity: Tuple[int, ...]
    _owner_of_attr: np.ndarray = field(init=False, repr=False, compare=False)
    _owner_start: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        L, K = self.n_labels, self.n_attrs
        owners = np.asarray(self.label_to_attr, dtype=np.int64)
        mult = np.asarray(self.attr_multiplicity, dtype=np.int64)

        if L < 1 or K < 1:
            raise TopologyError(f"topology needs L >= 1 and K >= 1, got L={L}, K={K}")
        if owners.shape != (L,):
            raise TopologyError(f"label_to_attr must map all {L} labels, got {owners.size} entries")
        n_owners = mult.size
        if n_owners == 0 or (mult < 1).any():
            raise TopologyError("every owner needs at least one attribute value")
        if owners.min() < 0 or owners.max() >= n_owners:
            raise TopologyError(f"label_to_attr entries must lie in [0, {n_owners})")
        if np.unique(owners).size != n_owners:
            missing = sorted(set(range(n_owners)) - set(owners.tolist()))
            raise TopologyError(f"label_to_attr is not surjective, unreached: {missing}")
        if int(mult.sum()) != K:
            raise TopologyError(f"attribute multiplicities sum to {int(mult.sum())}, expected K={K}")

        merged = n_owners < L
        split = bool((mult > 1).any())
        expected_kind = {
            (False, False): TopologyKind.ONE_TO_ONE,
            (True, False): TopologyKind.MANY_TO_ONE,
            (False, True): TopologyKind.ONE_TO_MANY,
            (True, True): TopologyKind.MANY_TO_MANY,
        }[(merged, split)]
        if expected_kind != self.kind:
            raise TopologyError(f"declared {self.kind.value} but the mapping describes {expected_kind.value}")
        if self.kind == TopologyKind.ONE_TO_ONE and not np.array_equal(owners, np.arange(L)):
            raise TopologyError("one-to-one topology requires the identity pairing")

        owner_of_attr = np.repeat(np.arange(n_owners), mult)
        owner_start = np.concatenate(([0], np.cumsum(mult)[:-1]))
        object.__setattr__(self, '_owner_of_attr', owner_of_attr)
        object.__setattr__(self, '_owner_start', owner_start)

    # Factories

    @classmethod
    def one_to_one(cls, n_labels: int) -> 'CorrelationTopology':
        return cls(TopologyKind.ONE_TO_ONE, n_labels, n_labels,
                   tuple(range(n_labels)), (1,) * n_labels)

    @classmethod
    def many_to_one(cls, label_to_attr: Sequence[int]) -> 'CorrelationTopology':
        """Several labels share one attribute value, e.g. [0, 0, 1, 2, ...]."""
        owners = tuple(int(a) for a in label_to_attr)
        n_attrs = (max(owners) + 1) if owners else 0
        return cls(TopologyKind.MANY_TO_ONE, len(owners), n_attrs, owners, (1,) * n_attrs)

    @classmethod
    def one_to_many(cls, attr_multiplicity: Sequence[int]) -> 'CorrelationTopology':
        """Label j owns attr_multiplicity[j] attribute values."""
        mult = tuple(int(m) for m in attr_multiplicity)
        return cls(TopologyKind.ONE_TO_MANY, len(mult), sum(mult), tuple(range(len(mult))), mult)

    @classmethod
    def many_to_many(cls, label_to_attr: Sequence[int], attr_multiplicity: Sequence[int]) -> 'CorrelationTopology':
        """Merge labels into groups via label_to_attr, then split groups by attr_multiplicity."""
        owners = tuple(int(a) for a in label_to_attr)
        mult = tuple(int(m) for m in attr_multiplicity)
        return cls(TopologyKind.MANY_TO_MANY, len(owners), sum(mult), owners, mult)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CorrelationTopology':
        try:
            return cls(TopologyKind(data['kind']), int(data['n_labels']), int(data['n_attrs']),
                       tuple(data['label_to_attr']), tuple(data['attr_multiplicity']))
        except (KeyError, ValueError, TypeError) as e:
            raise TopologyError(f"invalid topology description: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'n_labels': self.n_labels,
            'n_attrs': self.n_attrs,
            'label_to_attr': list(self.label_to_attr),
            'attr_multiplicity': list(self.attr_multiplicity),
        }

    # Structure queries

    @property
    def code(self) -> int:
        return self.kind.code

    @property
    def n_owners(self) -> int:
        return len(self.attr_multiplicity)

    @property
    def owner_of_attr(self) -> np.ndarray:
        return self._owner_of_attr

    def merge_part(self) -> 'CorrelationTopology':
        """The label-merging half of this topology (labels -> owners)."""
        if self.n_owners == self.n_labels:
            return CorrelationTopology.one_to_one(self.n_labels)
        return CorrelationTopology.many_to_one(self.label_to_attr)

    def split_part(self) -> 'CorrelationTopology':
        """The owner-splitting half of this topology (owners -> attributes)."""
        if self.n_owners == self.n_attrs:
            return CorrelationTopology.one_to_one(self.n_owners)
        return CorrelationTopology.one_to_many(self.attr_multiplicity)

    def aligned_attributes(self, y: int) -> Tuple[int, ...]:
        """Attribute values spuriously correlated with label y."""
        owner = self.label_to_attr[int(y)]
        start = int(self._owner_start[owner])
        return tuple(range(start, start + self.attr_multiplicity[owner]))

    def is_aligned(self, y, a):
        """True where attribute a is one of label y's correlated values (vectorized)."""
        owners = np.asarray(self.label_to_attr)[np.asarray(y)]
        result = self._owner_of_attr[np.asarray(a)] == owners
        return bool(result) if np.ndim(result) == 0 else result

    def check_labels(self, n_classes: int) -> None:
        if n_classes != self.n_labels:
            raise TopologyError(f"topology declares L={self.n_labels} labels, got {n_classes}")

    def equal_split_weights(self) -> np.ndarray:
        """Within-owner weights 1/multiplicity for every attribute."""
        mult = np.asarray(self.attr_multiplicity, dtype=np.float64)
        return 1.0 / mult[self._owner_of_attr]


def attribute_posterior(erm_probs: Tensor, topology: CorrelationTopology,
                        split_weights: Optional[Tensor] = None) -> np.ndarray:
    """
    Estimate P(a|x) from the ERM branch's class probabilities.

    Merged labels contribute the sum of their probabilities; an owner with
    several attribute values divides its mass by the split weights.

    Args:
        erm_probs: (L,) or (n, L) class probabilities
        topology: Correlation topology
        split_weights: (K,) or (n, K) within-owner weights; equal split when omitted

    Returns:
        (K,) or (n, K) attribute posteriors
    """
    probs = np.asarray(erm_probs, dtype=np.float64)
    single = probs.ndim == 1
    if single:
        probs = probs[None, :]
    if probs.ndim != 2 or probs.shape[1] != topology.n_labels:
        raise TopologyError(f"ERM output has {probs.shape[-1]} classes, topology declares L={topology.n_labels}")

    owner_mass = np.zeros((probs.shape[0], topology.n_owners))
    np.add.at(owner_mass.T, np.asarray(topology.label_to_attr), probs.T)

    weights = topology.equal_split_weights() if split_weights is None else np.asarray(split_weights, dtype=np.float64)
    if weights.shape[-1] != topology.n_attrs:
        raise TopologyError(f"split weights have {weights.shape[-1]} entries, expected K={topology.n_attrs}")

    posterior = owner_mass[:, topology.owner_of_attr] * weights
    return posterior[0] if single else posterior


def infer_attribute(erm_probs: Tensor, topology: CorrelationTopology,
                    split_weights: Optional[Tensor] = None):
    """Most probable attribute value (smallest index on ties)."""
    return argmax_first(attribute_posterior(erm_probs, topology, split_weights), axis=-1)


def is_minority(erm_probs: Tensor, y, topology: Optional[CorrelationTopology] = None):
    """
    Flag samples the ERM branch considers bias-conflicting.

    Without a topology this is argmax(erm_probs) != y. With a topology the
    inferred attribute is compared against the attributes correlated with y.
    """
    if topology is None:
        flags = argmax_first(erm_probs, axis=-1) != np.asarray(y)
    else:
        flags = ~np.asarray(topology.is_aligned(y, infer_attribute(erm_probs, topology)))
    return bool(flags) if np.ndim(flags) == 0 else flags


class AttributeSplitter:
    """
    Online k-means over ERM probability vectors, one model per owner with
    several attribute values.

    Split weights are fuzzy memberships proportional to 1/distance^2 to each
    of the owner's centers. Until all of an owner's centers are seeded, its
    attributes get equal weights.
    """

    def __init__(self, topology: CorrelationTopology):
        self.topology = topology
        self._centers: Dict[int, np.ndarray] = {}
        self._counts: Dict[int, np.ndarray] = {}
        self._seeded: Dict[int, int] = {}
        for owner, mult in enumerate(topology.attr_multiplicity):
            if mult > 1:
                self._centers[owner] = np.zeros((mult, topology.n_labels))
                self._counts[owner] = np.zeros(mult, dtype=np.int64)
                self._seeded[owner] = 0

    @property
    def active(self) -> bool:
        return bool(self._centers)

    def ready(self, owner: int) -> bool:
        return owner in self._centers and self._seeded[owner] == self.topology.attr_multiplicity[owner]

    def update(self, erm_probs: Tensor, y: Tensor) -> None:
        """Assign samples to their owner's nearest center and move it (running mean)."""
        probs = np.asarray(erm_probs, dtype=np.float64)
        owners = np.asarray(self.topology.label_to_attr)[np.asarray(y, dtype=np.int64)]
        for i, owner in enumerate(owners):
            owner = int(owner)
            if owner not in self._centers:
                continue
            centers, counts = self._centers[owner], self._counts[owner]
            seeded = self._seeded[owner]
            if seeded < len(counts):
                # Seed with vectors distinct from existing centers
                if seeded == 0 or np.min(np.sum((centers[:seeded] - probs[i]) ** 2, axis=1)) > 1e-12:
                    centers[seeded] = probs[i]
                    counts[seeded] = 1
                    self._seeded[owner] = seeded + 1
                continue
            j = int(np.argmin(np.sum((centers - probs[i]) ** 2, axis=1)))
            counts[j] += 1
            centers[j] += (probs[i] - centers[j]) / counts[j]

    def weights(self, erm_probs: Tensor) -> np.ndarray:
        """(n, K) split weights for attribute_posterior."""
        probs = np.asarray(erm_probs, dtype=np.float64)
        if probs.ndim == 1:
            probs = probs[None, :]
        n = probs.shape[0]
        out = np.tile(self.topology.equal_split_weights(), (n, 1))
        start = 0
        for owner, mult in enumerate(self.topology.attr_multiplicity):
            if mult > 1 and self.ready(owner):
                d2 = np.sum((probs[:, None, :] - self._centers[owner][None, :, :]) ** 2, axis=2)
                exact = d2 <= 1e-24
                inv = np.where(exact, 0.0, 1.0 / np.where(exact, 1.0, d2))
                has_exact = exact.any(axis=1)
                inv[has_exact] = exact[has_exact].astype(np.float64)
                out[:, start:start + mult] = inv / inv.sum(axis=1, keepdims=True)
            start += mult
        return out
