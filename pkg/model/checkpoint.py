"""
LCMLP1 parameter checkpoints.

Layout (all little-endian):
    6 bytes   magic b"LCMLP1"
    uint32    number of layers
    per layer:
        int32 fan_in, int32 fan_out
        float32[fan_in * fan_out] weights, row-major
        float32[fan_out] biases
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from model.mlp import MlpScorer
from utils.error_handlers import CheckpointFormatError, error_handler

logger = logging.getLogger(__name__)

MAGIC = b"LCMLP1"
_F32 = np.dtype('<f4')


def encode_checkpoint(model: MlpScorer) -> bytes:
    """Serialize a scorer's parameters to bytes."""
    parts = [MAGIC, struct.pack('<I', model.n_layers)]
    for w, b in zip(model.weights, model.biases):
        fan_in, fan_out = w.shape
        parts.append(struct.pack('<ii', fan_in, fan_out))
        parts.append(np.ascontiguousarray(w, dtype=_F32).tobytes())
        parts.append(np.ascontiguousarray(b, dtype=_F32).tobytes())
    return b''.join(parts)


def decode_checkpoint(data: bytes) -> MlpScorer:
    """
    Parse checkpoint bytes into a float32 scorer.

    Raises:
        CheckpointFormatError: on bad magic, truncation or non-chaining layers
    """
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"bad checkpoint magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}", offset=0)

    offset = len(MAGIC)
    if len(data) < offset + 4:
        raise CheckpointFormatError("truncated checkpoint header", offset=offset)
    (n_layers,) = struct.unpack_from('<I', data, offset)
    offset += 4
    if n_layers == 0:
        raise CheckpointFormatError("checkpoint declares zero layers", offset=offset - 4)

    weights, biases = [], []
    for layer in range(n_layers):
        if len(data) < offset + 8:
            raise CheckpointFormatError(f"truncated dimensions of layer {layer}", offset=offset)
        fan_in, fan_out = struct.unpack_from('<ii', data, offset)
        if fan_in <= 0 or fan_out <= 0:
            raise CheckpointFormatError(f"invalid dimensions {fan_in}x{fan_out} in layer {layer}", offset=offset)
        if weights and fan_in != weights[-1].shape[1]:
            raise CheckpointFormatError(f"layer {layer} fan_in {fan_in} does not chain", offset=offset)
        offset += 8

        n_bytes = 4 * (fan_in * fan_out + fan_out)
        if len(data) < offset + n_bytes:
            raise CheckpointFormatError(f"truncated parameters of layer {layer}", offset=len(data))
        w = np.frombuffer(data, dtype=_F32, count=fan_in * fan_out, offset=offset).reshape(fan_in, fan_out)
        offset += 4 * fan_in * fan_out
        b = np.frombuffer(data, dtype=_F32, count=fan_out, offset=offset)
        offset += 4 * fan_out
        weights.append(w.astype(np.float32))
        biases.append(b.astype(np.float32))

    if offset != len(data):
        raise CheckpointFormatError(f"{len(data) - offset} trailing bytes after last layer", offset=offset)

    return MlpScorer.from_parameters(weights, biases)


def save_checkpoint(model: MlpScorer, path: Union[str, Path]) -> Path:
    path = Path(path)
    with error_handler():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_checkpoint(model))
    logger.info(f"Saved checkpoint {path} ({model.layer_dims})")
    return path


def load_checkpoint(path: Union[str, Path]) -> MlpScorer:
    with error_handler():
        data = Path(path).read_bytes()
    return decode_checkpoint(data)
