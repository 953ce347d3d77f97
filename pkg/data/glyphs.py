"""
Deterministic seven-segment digit glyphs, used when MNIST files are absent.
"""

import logging
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

SIZE = 28
# Horizontal shift per row, about three pixels at the top and bottom of a tall glyph
MAX_SHEAR = 0.3

# Segment order: top, top-right, bottom-right, bottom, bottom-left, top-left, middle
DIGIT_SEGMENTS = {
    0: (1, 1, 1, 1, 1, 1, 0),
    1: (0, 1, 1, 0, 0, 0, 0),
    2: (1, 1, 0, 1, 1, 0, 1),
    3: (1, 1, 1, 1, 0, 0, 1),
    4: (0, 1, 1, 0, 0, 1, 1),
    5: (1, 0, 1, 1, 0, 1, 1),
    6: (1, 0, 1, 1, 1, 1, 1),
    7: (1, 1, 1, 0, 0, 0, 0),
    8: (1, 1, 1, 1, 1, 1, 1),
    9: (1, 1, 1, 1, 0, 1, 1),
}


def _segment_boxes(top: int, left: int, height: int, width: int, t: int):
    """(row0, row1, col0, col1) of every segment for a glyph box."""
    mid = top + height // 2
    bottom = top + height
    right = left + width
    return (
        (top, top + t, left, right),
        (top, mid + 1, right - t, right),
        (mid, bottom, right - t, right),
        (bottom - t, bottom, left, right),
        (mid, bottom, left, left + t),
        (top, mid + 1, left, left + t),
        (mid - t // 2, mid - t // 2 + t, left, right),
    )


def slant(canvas: np.ndarray, shear: float) -> np.ndarray:
    """Shift each row horizontally by shear * (center row - row); pixels pushed off the edge are dropped."""
    out = np.zeros_like(canvas)
    center = (canvas.shape[0] - 1) / 2.0
    width = canvas.shape[1]
    for row in range(canvas.shape[0]):
        shift = int(round(shear * (center - row)))
        if shift >= 0:
            out[row, shift:] = canvas[row, :width - shift]
        else:
            out[row, :shift] = canvas[row, -shift:]
    return out


def render_glyph(digit: int, rng: np.random.Generator) -> np.ndarray:
    """One 28x28 glyph with random placement, slant, stroke width and stroke noise."""
    canvas = np.zeros((SIZE, SIZE), dtype=np.float32)
    height = int(rng.integers(16, 21))
    width = int(rng.integers(9, 13))
    t = int(rng.integers(2, 4))
    top = int(rng.integers(2, SIZE - height - 1))
    left = int(rng.integers(4, SIZE - width - 3))
    intensity = rng.uniform(0.7, 1.0)
    shear = rng.uniform(-MAX_SHEAR, MAX_SHEAR)

    for on, (r0, r1, c0, c1) in zip(DIGIT_SEGMENTS[int(digit)], _segment_boxes(top, left, height, width, t)):
        if on:
            canvas[r0:r1, c0:c1] = intensity
    canvas = slant(canvas, shear)

    stroke = canvas > 0
    noise = rng.uniform(0.75, 1.0, size=canvas.shape).astype(np.float32)
    canvas[stroke] *= noise[stroke]
    return canvas


def make_glyphs(labels: np.ndarray, seed: int) -> np.ndarray:
    """Render one glyph per label; (n, 28, 28) float32 in [0, 1]."""
    rng = np.random.default_rng(seed)
    images = np.empty((len(labels), SIZE, SIZE), dtype=np.float32)
    for i, digit in enumerate(labels):
        images[i] = render_glyph(int(digit), rng)
    return images


def make_glyph_digits(n_train: int, n_test: int, seed: int, n_classes: int = 10
                      ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Synthetic replacement for the MNIST train and test splits.

    Returns:
        Tuple of (train images, train labels, test images, test labels)
    """
    rng = np.random.default_rng(seed)
    train_labels = np.resize(np.arange(n_classes), n_train)
    test_labels = np.resize(np.arange(n_classes), n_test)
    rng.shuffle(train_labels)
    rng.shuffle(test_labels)
    logger.warning(f"Using synthetic glyph digits ({n_train} train, {n_test} test) in place of MNIST")
    return (make_glyphs(train_labels, seed + 1), train_labels.astype(np.int64),
            make_glyphs(test_labels, seed + 2), test_labels.astype(np.int64))
