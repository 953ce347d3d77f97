"""
IDX container reader (the MNIST distribution format).

Images file:
    [offset] [type]          [value]
    0000     32 bit integer  0x00000803  magic
    0004     32 bit integer  n           number of images
    0008     32 bit integer  rows
    0012     32 bit integer  cols
    0016     unsigned byte   pixels, row-major
Labels file:
    0000     32 bit integer  0x00000801  magic
    0004     32 bit integer  n           number of items
    0008     unsigned byte   labels
All integers are big-endian.
"""

import gzip
import logging
import struct
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from utils.error_handlers import IdxFormatError, error_handler

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# Largest payload we are willing to allocate for a single file
MAX_PAYLOAD = 1 << 31

PathLike = Union[str, Path]

MNIST_FILES = {
    'train': ('train-images-idx3-ubyte', 'train-labels-idx1-ubyte'),
    'test': ('t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte'),
}


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    with error_handler():
        if path.suffix == '.gz':
            with gzip.open(path, 'rb') as handle:
                return handle.read()
        return path.read_bytes()


def parse_idx_images(data: bytes) -> np.ndarray:
    """Decode an images payload to float32 values in [0, 1], shape (n, rows, cols)."""
    if len(data) < 4:
        raise IdxFormatError("truncated image header: missing magic", offset=len(data))
    (magic,) = struct.unpack_from('>I', data, 0)
    if magic != IMAGE_MAGIC:
        if magic == LABEL_MAGIC:
            raise IdxFormatError(f"expected image magic 0x{IMAGE_MAGIC:08x}, found label magic", offset=0)
        raise IdxFormatError(f"expected image magic 0x{IMAGE_MAGIC:08x}, got 0x{magic:08x}", offset=0)
    if len(data) < 16:
        raise IdxFormatError("truncated image header: missing dimensions", offset=len(data))

    n, rows, cols = struct.unpack_from('>III', data, 4)
    size = n * rows * cols
    if size > MAX_PAYLOAD:
        raise IdxFormatError(f"image dimensions {n}x{rows}x{cols} overflow the payload limit", offset=4)
    if len(data) < 16 + size:
        raise IdxFormatError(f"truncated image payload: expected {size} bytes, found {len(data) - 16}",
                             offset=len(data))

    pixels = np.frombuffer(data, dtype=np.uint8, count=size, offset=16)
    return (pixels.astype(np.float32) / np.float32(255.0)).reshape(n, rows, cols)


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Decode a labels payload to an int64 vector."""
    if len(data) < 4:
        raise IdxFormatError("truncated label header: missing magic", offset=len(data))
    (magic,) = struct.unpack_from('>I', data, 0)
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"expected label magic 0x{LABEL_MAGIC:08x}, got 0x{magic:08x}", offset=0)
    if len(data) < 8:
        raise IdxFormatError("truncated label header: missing count", offset=len(data))

    (n,) = struct.unpack_from('>I', data, 4)
    if n > MAX_PAYLOAD:
        raise IdxFormatError(f"label count {n} overflows the payload limit", offset=4)
    if len(data) < 8 + n:
        raise IdxFormatError(f"truncated label payload: expected {n} bytes, found {len(data) - 8}",
                             offset=len(data))
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=8).astype(np.int64)


def load_idx(images_path: PathLike, labels_path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    Load an IDX images/labels pair.

    Args:
        images_path: Images file (optionally .gz)
        labels_path: Labels file (optionally .gz)

    Returns:
        Tuple of (images (n, rows, cols) in [0, 1], labels (n,))
    """
    images = parse_idx_images(_read_bytes(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels", offset=4)
    logger.info(f"Loaded {images.shape[0]} images of {images.shape[1]}x{images.shape[2]} from {images_path}")
    return images, labels


def _locate(directory: Path, stem: str) -> Optional[Path]:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    return None


def load_mnist(directory: PathLike, split: str = 'train') -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """
    Load an MNIST split from a directory with the standard file names.

    Returns:
        (images, labels), or None if the files are not present
    """
    directory = Path(directory)
    image_stem, label_stem = MNIST_FILES[split]
    images_path = _locate(directory, image_stem)
    labels_path = _locate(directory, label_stem)
    if images_path is None or labels_path is None:
        logger.info(f"MNIST {split} files not found in {directory}")
        return None
    return load_idx(images_path, labels_path)
