"""
Gaussian toy with a core feature and an easier spurious feature.
"""

import logging
import math
from typing import Optional

import numpy as np

from data.colored_mnist import assign_train_attributes
from data.container import BiasedDataset
from debias.topology import CorrelationTopology
from utils.error_handlers import ValidationError

logger = logging.getLogger(__name__)

# Attribute-mean distance unless given; three times the default core separation
SPURIOUS_SEPARATION = 9.0


def class_means(n_classes: int, dims: int, separation: float) -> np.ndarray:
    """Means with pairwise distance `separation` (symmetric pair on axis 0 for two classes)."""
    means = np.zeros((n_classes, dims))
    if n_classes == 2:
        means[0, 0], means[1, 0] = -separation / 2.0, separation / 2.0
        return means
    if dims < n_classes:
        raise ValidationError(f"{n_classes} classes need at least {n_classes} feature dimensions, got {dims}")
    means[np.arange(n_classes), np.arange(n_classes)] = separation / math.sqrt(2.0)
    return means


def make_gaussian_toy(n_labels: int = 2, n_attrs: int = 2, ratio: float = 0.01, d_core: int = 2,
                      d_spur: int = 2, separation: float = 3.0, seed: int = 0, n_train: int = 5000,
                      test_per_group: int = 500, spurious_separation: Optional[float] = None) -> BiasedDataset:
    """
    Build x = [core, spurious] with unit-variance Gaussian noise.

    Args:
        n_labels: Number of classes L (must equal n_attrs)
        n_attrs: Number of attribute values K
        ratio: Fraction of training samples whose attribute disagrees with the label
        d_core: Dimensions of the label-driven block
        d_spur: Dimensions of the attribute-driven block
        separation: Distance between class means in the core block
        seed: Generator seed
        n_train: Training samples
        test_per_group: Test samples per (y, a) cell
        spurious_separation: Distance between attribute means, SPURIOUS_SEPARATION by default

    Returns:
        BiasedDataset with one-to-one topology
    """
    if n_labels != n_attrs:
        raise ValidationError(f"the Gaussian toy is one-to-one, got L={n_labels}, K={n_attrs}")
    if separation < 0:
        raise ValidationError(f"separation must be non-negative, got {separation}")
    if spurious_separation is None:
        spurious_separation = SPURIOUS_SEPARATION
    if spurious_separation <= 0:
        raise ValidationError(f"spurious separation must be positive, got {spurious_separation}")

    topology = CorrelationTopology.one_to_one(n_labels)
    rng = np.random.default_rng(seed)
    core_means = class_means(n_labels, d_core, separation)
    spur_means = class_means(n_attrs, d_spur, spurious_separation)

    def draw(y: np.ndarray, a: np.ndarray) -> np.ndarray:
        core = core_means[y] + rng.standard_normal((len(y), d_core))
        spur = spur_means[a] + rng.standard_normal((len(a), d_spur))
        return np.hstack([core, spur]).astype(np.float32)

    y_train = np.resize(np.arange(n_labels), n_train)
    rng.shuffle(y_train)
    a_train = assign_train_attributes(y_train, topology, ratio, rng)
    x_train = draw(y_train, a_train)

    y_test = np.repeat(np.arange(n_labels), n_attrs * test_per_group)
    a_test = np.tile(np.repeat(np.arange(n_attrs), test_per_group), n_labels)
    x_test = draw(y_test, a_test)

    return BiasedDataset(x_train, y_train.astype(np.int64), a_train, x_test, y_test, a_test,
                         topology, float(ratio), seed=seed, name='gauss',
                         extra={'separation': separation, 'spurious_separation': spurious_separation,
                                'd_core': d_core, 'd_spur': d_spur})


def gaussian_bayes_gba(separation: float) -> float:
    """
    Best achievable GBA for two classes: on a balanced test set the spurious
    block carries no label information, leaving Phi(separation / 2).
    """
    return 0.5 * (1.0 + math.erf(separation / 2.0 / math.sqrt(2.0)))
