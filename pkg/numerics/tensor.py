"""
Dense tensor helpers and numerically stable reductions.
"""

import logging
from typing import Any, Union

import numpy as np

from utils.error_handlers import ContractError, NumericError

logger = logging.getLogger(__name__)

# Tensors are plain row-major numpy arrays
Tensor = np.ndarray

DTypeLike = Union[str, np.dtype, type]


def as_tensor(values: Any, dtype: DTypeLike = np.float64) -> Tensor:
    """
    Convert values to a contiguous row-major array.

    Args:
        values: Array-like input
        dtype: Target precision

    Returns:
        C-contiguous array of the requested dtype
    """
    return np.ascontiguousarray(values, dtype=np.dtype(dtype))


def ensure_finite(array: Tensor, what: str = 'tensor') -> Tensor:
    """
    Raise NumericError if any element is NaN or infinite.

    Args:
        array: Array to check
        what: Name used in the error message

    Returns:
        The unchanged array
    """
    array = np.asarray(array)
    finite = np.isfinite(array)
    if not finite.all():
        index = tuple(int(i) for i in np.argwhere(~finite)[0])
        value = array[index] if index else array.item()
        raise NumericError(f"Non-finite value in {what} at index {index}: {value}",
                           details={'what': what, 'index': list(index)})
    return array


def log_sum_exp(v: Tensor, axis: int = -1) -> Union[float, Tensor]:
    """
    Max-shifted log(sum(exp(v))) along an axis.

    A 1-D input returns a Python-compatible scalar; higher ranks reduce the
    given axis.
    """
    v = np.asarray(v)
    if v.size == 0 or v.shape[axis] == 0:
        raise ContractError("log_sum_exp of an empty vector")

    shift = np.max(v, axis=axis, keepdims=True)
    # Rows that are entirely -inf stay -inf rather than producing NaN
    shift = np.where(np.isfinite(shift), shift, 0)
    out = np.log(np.sum(np.exp(v - shift), axis=axis, keepdims=True)) + shift
    out = np.squeeze(out, axis=axis)
    if out.ndim == 0:
        return out[()]
    return out


def softmax(v: Tensor, axis: int = -1) -> Tensor:
    """Shift-invariant softmax along an axis."""
    v = np.asarray(v)
    if v.size == 0 or v.shape[axis] == 0:
        raise ContractError("softmax of an empty vector")

    shifted = v - np.max(v, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(v: Tensor, axis: int = -1) -> Tensor:
    """log(softmax(v)) without forming the probabilities."""
    v = np.asarray(v)
    shifted = v - np.max(v, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def argmax_first(v: Tensor, axis: int = -1) -> Union[int, Tensor]:
    """Argmax with ties broken toward the smallest index."""
    # np.argmax already returns the first maximal index
    out = np.argmax(np.asarray(v), axis=axis)
    if np.ndim(out) == 0:
        return int(out)
    return out
