"""Biased dataset construction, MNIST ingestion and the LCDS1 container."""

from data.container import BiasedDataset, decode_dataset, encode_dataset, load_dataset, save_dataset
from data.idx import load_idx, load_mnist, parse_idx_images, parse_idx_labels
from data.colored_mnist import (
    DATASET_TOPOLOGIES,
    PALETTE,
    DigitSplits,
    build_colored_mnist,
    colorize,
    make_colored_mnist,
)
from data.gaussian import gaussian_bayes_gba, make_gaussian_toy

__all__ = [
    'BiasedDataset',
    'decode_dataset',
    'encode_dataset',
    'load_dataset',
    'save_dataset',
    'load_idx',
    'load_mnist',
    'parse_idx_images',
    'parse_idx_labels',
    'DATASET_TOPOLOGIES',
    'PALETTE',
    'DigitSplits',
    'build_colored_mnist',
    'colorize',
    'make_colored_mnist',
    'gaussian_bayes_gba',
    'make_gaussian_toy',
]
