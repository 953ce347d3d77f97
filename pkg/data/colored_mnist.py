"""
Colored-MNIST family: digits tinted with a color that is spuriously
correlated with the label under any correlation topology.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from data.container import BiasedDataset
from data.glyphs import make_glyph_digits
from data.idx import load_mnist
from debias.topology import CorrelationTopology
from utils.error_handlers import ConfigurationError, ValidationError

logger = logging.getLogger(__name__)

# Every channel of every color is at least CHANNEL_FLOOR, so a digit's strokes
# show up in all three planes and only the channel ratios carry the color
CHANNEL_FLOOR = 0.2
_HUES = np.array([
    (1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
    (1.0, 1.0, 0.0),
    (1.0, 0.0, 1.0),
    (0.0, 1.0, 1.0),
    (1.0, 0.5, 0.0),
    (0.5, 0.0, 1.0),
    (0.0, 0.5, 0.5),
    (0.5, 0.25, 0.0),
])
PALETTE = CHANNEL_FLOOR + (1.0 - CHANNEL_FLOOR) * _HUES
# Needed once K exceeds the base palette (one-to-many over ten digits)
EXTRA_COLOR = CHANNEL_FLOOR + (1.0 - CHANNEL_FLOOR) * np.array((1.0, 0.75, 0.8))

N_DIGITS = 10
CHUNK = 4096
# Split sizes of the glyph fallback, those of MNIST
GLYPH_TRAIN = 60000
GLYPH_TEST = 10000

DATASET_TOPOLOGIES = {
    'cmnist': lambda: CorrelationTopology.one_to_one(N_DIGITS),
    # digits 0 and 1 share color 0
    'cmnist-m2o': lambda: CorrelationTopology.many_to_one([0, 0] + list(range(1, N_DIGITS - 1))),
    # digit 0 carries two colors
    'cmnist-o2m': lambda: CorrelationTopology.one_to_many([2] + [1] * (N_DIGITS - 1)),
    # digits 0 and 1 share a pair of colors
    'cmnist-m2m': lambda: CorrelationTopology.many_to_many([0, 0] + list(range(1, N_DIGITS - 1)),
                                                           [2] + [1] * (N_DIGITS - 2)),
}


@dataclass
class DigitSplits:
    """Grayscale digits before coloring."""

    train_images: np.ndarray
    train_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray
    synthetic: bool = False


def default_palette(n_attrs: int) -> np.ndarray:
    if n_attrs <= len(PALETTE):
        return PALETTE[:n_attrs].copy()
    if n_attrs == len(PALETTE) + 1:
        return np.vstack([PALETTE, EXTRA_COLOR])
    raise ConfigurationError(f"no default palette for K={n_attrs} colors")


def colorize(gray: np.ndarray, colors: np.ndarray, threads: int = 1) -> np.ndarray:
    """
    Tint grayscale digits and flatten channel-first.

    Args:
        gray: (n, 28, 28) intensities in [0, 1]
        colors: (n, 3) RGB per sample
        threads: Worker cap; chunks are written in place so order is fixed

    Returns:
        (n, 3 * 28 * 28) float32 features
    """
    n = gray.shape[0]
    out = np.empty((n, 3 * gray.shape[1] * gray.shape[2]), dtype=np.float32)
    colors = np.asarray(colors, dtype=np.float32)

    def fill(start: int) -> None:
        stop = min(start + CHUNK, n)
        tinted = gray[start:stop, None, :, :] * colors[start:stop, :, None, None]
        out[start:stop] = tinted.reshape(stop - start, -1)

    starts = range(0, n, CHUNK)
    if threads > 1 and n > CHUNK:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)
    return out


def minority_count(n_class: int, ratio: float, label: int) -> int:
    """Number of off-color samples for a class, at least one when the class is non-empty."""
    count = int(round(ratio * n_class))
    if count == 0 and n_class > 0:
        logger.warning(f"Minority ratio {ratio} gives class {label} no minority samples, using 1")
        count = 1
    return count


def assign_train_attributes(labels: np.ndarray, topology: CorrelationTopology, ratio: float,
                            rng: np.random.Generator) -> np.ndarray:
    """
    Draw the spurious attribute of every training sample.

    Exactly round(ratio * n_y) samples of class y (at least one) get a
    uniformly random non-aligned attribute; the rest are spread evenly over
    the class's aligned attributes.
    """
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"minority ratio must lie in (0, 1), got {ratio}")
    labels = np.asarray(labels, dtype=np.int64)
    attrs = np.empty(len(labels), dtype=np.int64)
    all_attrs = np.arange(topology.n_attrs)

    for label in range(topology.n_labels):
        members = rng.permutation(np.flatnonzero(labels == label))
        aligned = np.asarray(topology.aligned_attributes(label))
        others = np.setdiff1d(all_attrs, aligned)
        n_min = minority_count(members.size, ratio, label) if others.size else 0

        minority, majority = members[:n_min], members[n_min:]
        if n_min:
            attrs[minority] = others[rng.integers(0, others.size, size=n_min)]
        attrs[majority] = aligned[np.arange(majority.size) % aligned.size]
    return attrs


def assign_test_attributes(labels: np.ndarray, n_attrs: int, rng: np.random.Generator,
                           per_group: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pick an exactly group-balanced test subset.

    Returns:
        Tuple of (selected indices into labels, attribute of each selected sample)
    """
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    available = min(int(np.sum(labels == c)) // n_attrs for c in classes)
    cell = available if per_group is None else min(per_group, available)
    if cell == 0:
        raise ValidationError(f"not enough held-out digits for a balanced test set over {n_attrs} colors")

    indices, attrs = [], []
    for c in classes:
        members = rng.permutation(np.flatnonzero(labels == c))[:cell * n_attrs]
        indices.append(members)
        attrs.append(np.repeat(np.arange(n_attrs), cell))
    order = np.concatenate(indices)
    return order, np.concatenate(attrs)


def make_colored_mnist(digits: DigitSplits, topology: CorrelationTopology, ratio: float,
                       palette: Optional[Sequence[Sequence[float]]] = None, seed: int = 0,
                       test_per_group: Optional[int] = None, threads: int = 1,
                       name: str = 'cmnist') -> BiasedDataset:
    """
    Build a biased Colored-MNIST dataset.

    Args:
        digits: Grayscale train/test digits
        topology: Label/color structure
        ratio: Fraction of off-color training samples per class
        palette: K RGB colors; defaults to the fixed palette
        seed: Attribute-assignment seed
        test_per_group: Optional cap on samples per (digit, color) test cell
        threads: Worker cap for tinting
        name: Dataset name recorded in the card

    Returns:
        BiasedDataset with flattened (3, 28, 28) features
    """
    palette = default_palette(topology.n_attrs) if palette is None else np.asarray(palette, dtype=np.float64)
    if palette.shape != (topology.n_attrs, 3):
        raise ConfigurationError(f"palette has {palette.shape[0]} colors, topology needs K={topology.n_attrs}")
    topology.check_labels(int(max(digits.train_labels.max(), digits.test_labels.max())) + 1)

    rng = np.random.default_rng(seed)
    a_train = assign_train_attributes(digits.train_labels, topology, ratio, rng)
    test_idx, a_test = assign_test_attributes(digits.test_labels, topology.n_attrs, rng, test_per_group)

    x_train = colorize(digits.train_images, palette[a_train], threads)
    x_test = colorize(digits.test_images[test_idx], palette[a_test], threads)

    dataset = BiasedDataset(
        x_train=x_train,
        y_train=np.asarray(digits.train_labels, dtype=np.int64),
        a_train_hidden=a_train,
        x_test=x_test,
        y_test=np.asarray(digits.test_labels, dtype=np.int64)[test_idx],
        a_test=a_test,
        topology=topology,
        minority_ratio=float(ratio),
        seed=seed,
        name=name,
        palette=palette,
        synthetic=digits.synthetic,
    )
    logger.info(f"Built {name}: {len(x_train)} train ({dataset.train_minority_fraction():.4f} minority), "
                f"{len(x_test)} balanced test, K={topology.n_attrs}")
    return dataset


def load_digits(mnist_dir: Optional[str], seed: int = 0, n_train: Optional[int] = None,
                n_test: Optional[int] = None) -> DigitSplits:
    """
    MNIST from mnist_dir, or synthetic glyphs if the files are missing.

    Args:
        mnist_dir: Directory with the standard IDX files
        seed: Seed for subsampling and for glyph synthesis
        n_train: Optional number of training digits to keep
        n_test: Optional number of held-out digits to keep
    """
    train = load_mnist(mnist_dir, 'train') if mnist_dir else None
    test = load_mnist(mnist_dir, 'test') if mnist_dir else None
    if train is None or test is None:
        glyphs = make_glyph_digits(n_train or GLYPH_TRAIN, n_test or GLYPH_TEST, seed)
        return DigitSplits(*glyphs, synthetic=True)

    rng = np.random.default_rng(seed)
    (train_images, train_labels), (test_images, test_labels) = train, test
    if n_train is not None and n_train < len(train_labels):
        keep = np.sort(rng.choice(len(train_labels), size=n_train, replace=False))
        train_images, train_labels = train_images[keep], train_labels[keep]
    if n_test is not None and n_test < len(test_labels):
        keep = np.sort(rng.choice(len(test_labels), size=n_test, replace=False))
        test_images, test_labels = test_images[keep], test_labels[keep]
    return DigitSplits(train_images, train_labels, test_images, test_labels)


def build_colored_mnist(kind: str, ratio: float, seed: int = 0, mnist_dir: Optional[str] = None,
                        n_train: Optional[int] = None, n_test: Optional[int] = None,
                        test_per_group: Optional[int] = None, threads: int = 1) -> BiasedDataset:
    """Named constructions: cmnist, cmnist-m2o, cmnist-o2m, cmnist-m2m."""
    if kind not in DATASET_TOPOLOGIES:
        raise ValidationError(f"unknown colored-MNIST variant {kind!r}")
    digits = load_digits(mnist_dir, seed=seed, n_train=n_train, n_test=n_test)
    return make_colored_mnist(digits, DATASET_TOPOLOGIES[kind](), ratio, seed=seed,
                              test_per_group=test_per_group, threads=threads, name=kind)
