"""
Training objectives with analytic gradients w.r.t. logits.

Per-sample functions take a logit vector and return (loss, grad). The
`*_batch` variants take an (n, L) matrix and return the mean loss together
with the gradient of that mean, so their output feeds MlpScorer.backward
directly.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from numerics.tensor import Tensor, log_sum_exp, softmax
from utils.error_handlers import ConfigurationError, ShapeError, ValidationError

logger = logging.getLogger(__name__)

PRIOR_FLOOR = 1e-8


@dataclass(frozen=True)
class GceConfig:
    """Generalized cross-entropy exponent; q = 0 is plain cross-entropy."""

    q: float = 0.7

    def __post_init__(self):
        if not 0.0 <= self.q < 1.0:
            raise ConfigurationError(f"GCE q must lie in [0, 1), got {self.q}")


@dataclass(frozen=True)
class CorrectionRow:
    """
    Per-class logit offsets ln P̂(c, a_x) for one sample.

    Attributes:
        offsets: Length-L vector of log prior values
        floor_epsilon: Clamp applied to the prior values before the log
    """

    offsets: np.ndarray
    floor_epsilon: float = PRIOR_FLOOR

    @classmethod
    def from_prior_row(cls, values: Sequence[float], floor_epsilon: float = PRIOR_FLOOR) -> 'CorrectionRow':
        """Build offsets from the prior column P̂(·, a_x) (possibly a mixup blend)."""
        values = np.asarray(values, dtype=np.float64)
        return cls(np.log(np.maximum(values, floor_epsilon)), floor_epsilon)


def _check_label(logits: np.ndarray, y: int) -> int:
    if logits.ndim != 1:
        raise ShapeError("expected a logit vector", expected=1, actual=logits.ndim)
    n_classes = logits.shape[0]
    if n_classes < 2:
        raise ValidationError(f"need at least two classes, got {n_classes}")
    y = int(y)
    if not 0 <= y < n_classes:
        raise ValidationError(f"label {y} out of range for {n_classes} classes")
    return y


def _check_labels(logits: np.ndarray, y: np.ndarray) -> np.ndarray:
    if logits.ndim != 2:
        raise ShapeError("expected an (n, L) logit matrix", expected=2, actual=logits.ndim)
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (logits.shape[0],):
        raise ShapeError("labels do not match the batch size", expected=logits.shape[0], actual=list(y.shape))
    if logits.shape[1] < 2:
        raise ValidationError(f"need at least two classes, got {logits.shape[1]}")
    if y.size and (y.min() < 0 or y.max() >= logits.shape[1]):
        raise ValidationError(f"labels out of range for {logits.shape[1]} classes")
    return y


def _shifted_offsets(offsets: np.ndarray) -> np.ndarray:
    # Softmax is invariant to a per-row constant; constant rows become exact zeros
    return offsets - np.max(offsets, axis=-1, keepdims=True)


# Per-sample objectives

def ce_loss(logits: Tensor, y: int) -> Tuple[float, Tensor]:
    """Softmax cross-entropy: lse(z) - z_y, gradient softmax(z) - e_y."""
    z = np.asarray(logits, dtype=np.float64)
    y = _check_label(z, y)
    loss = float(log_sum_exp(z) - z[y])
    grad = softmax(z)
    grad[y] -= 1.0
    return loss, grad


def gce_loss(probs: Tensor, y: int, cfg: GceConfig) -> Tuple[float, Tensor]:
    """
    Generalized cross-entropy (1 - p_y^q) / q.

    Args:
        probs: Softmax output of the scorer
        y: True class
        cfg: GCE exponent

    Returns:
        Tuple of (loss, gradient w.r.t. the logits that produced probs)
    """
    p = np.asarray(probs, dtype=np.float64)
    y = _check_label(p, y)
    p_y = p[y]
    if not p_y > 0:
        raise ValidationError(f"GCE needs probs[y] > 0, got {p_y}")

    log_p = np.log(p_y)
    if cfg.q == 0.0:
        loss = -log_p
    else:
        loss = -np.expm1(cfg.q * log_p) / cfg.q
    scale = np.exp(cfg.q * log_p)

    grad = p.copy()
    grad[y] -= 1.0
    return float(loss) + 0.0, scale * grad


def lc_loss(logits: Tensor, y: int, correction: CorrectionRow) -> Tuple[float, Tensor]:
    """
    Logit-corrected cross-entropy lse(z + o) - (z_y + o_y).

    The offsets are added before the softmax, so the scorer itself learns
    logits with the group prior removed.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = _check_label(z, y)
    offsets = np.asarray(correction.offsets, dtype=np.float64)
    if offsets.shape != z.shape:
        raise ShapeError("correction row length differs from the number of classes",
                         expected=z.shape[0], actual=offsets.shape[0])
    return ce_loss(z + _shifted_offsets(offsets), y)


def lc_pairwise_loss(logits: Tensor, y: int, correction: CorrectionRow) -> float:
    """Pairwise-margin form log(1 + sum_{j != y} exp(z_j - z_y + o_j - o_y))."""
    z = np.asarray(logits, dtype=np.float64)
    y = _check_label(z, y)
    o = np.asarray(correction.offsets, dtype=np.float64)
    margins = (z - z[y]) + (o - o[y])
    margins[y] = 0.0  # the "1 +" term
    return float(log_sum_exp(margins))


def reweighted_ce_loss(logits: Tensor, y: int, weight: float) -> Tuple[float, Tensor]:
    """Cross-entropy scaled by a positive per-sample weight."""
    if not weight > 0:
        raise ValidationError(f"reweighting weight must be positive, got {weight}")
    loss, grad = ce_loss(logits, y)
    return weight * loss, weight * grad


def fisher_weights(prior_values: Tensor, floor_epsilon: float = PRIOR_FLOOR) -> Tensor:
    """
    Inverse group-prior weights normalized to mean 1 over the batch.

    Args:
        prior_values: P̂(y_i, a_i) per sample (blended under mixup)

    Returns:
        Weights w_i proportional to 1 / P̂(y_i, a_i)
    """
    values = np.asarray(prior_values, dtype=np.float64)
    if values.size == 0:
        return values
    raw = 1.0 / np.maximum(values, floor_epsilon)
    return raw / raw.mean()


# Batched objectives (mean over the batch)

def _ce_rows(logits: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = logits.shape[0]
    rows = np.arange(n)
    losses = log_sum_exp(logits, axis=1) - logits[rows, y]
    grad = softmax(logits, axis=1)
    grad[rows, y] -= 1
    return np.atleast_1d(losses), grad


def ce_loss_batch(logits: Tensor, y: Tensor) -> Tuple[float, Tensor]:
    z = np.asarray(logits)
    y = _check_labels(z, y)
    losses, grad = _ce_rows(z, y)
    n = z.shape[0]
    return float(np.mean(losses, dtype=np.float64)), grad / n


def gce_loss_batch(logits: Tensor, y: Tensor, cfg: GceConfig) -> Tuple[float, Tensor]:
    z = np.asarray(logits)
    y = _check_labels(z, y)
    n = z.shape[0]
    rows = np.arange(n)
    probs = softmax(z, axis=1)
    p_y = np.maximum(probs[rows, y], np.finfo(probs.dtype).tiny)
    log_p = np.log(p_y)
    if cfg.q == 0.0:
        losses = -log_p
    else:
        losses = -np.expm1(cfg.q * log_p) / cfg.q
    scale = np.exp(cfg.q * log_p)

    grad = probs
    grad[rows, y] -= 1
    grad = grad * scale[:, None]
    return float(np.mean(losses, dtype=np.float64)), grad / n


def lc_loss_batch(logits: Tensor, y: Tensor, offsets: Tensor) -> Tuple[float, Tensor]:
    """
    Batched logit-corrected cross-entropy.

    Args:
        logits: (n, L) scorer outputs
        y: (n,) labels
        offsets: (n, L) log prior rows, one CorrectionRow per sample
    """
    z = np.asarray(logits)
    y = _check_labels(z, y)
    o = np.asarray(offsets)
    if o.shape != z.shape:
        raise ShapeError("correction rows do not match logits", expected=list(z.shape), actual=list(o.shape))
    corrected = z + _shifted_offsets(o).astype(z.dtype, copy=False)
    losses, grad = _ce_rows(corrected, y)
    n = z.shape[0]
    return float(np.mean(losses, dtype=np.float64)), grad / n


def reweighted_ce_loss_batch(logits: Tensor, y: Tensor, weights: Tensor) -> Tuple[float, Tensor]:
    z = np.asarray(logits)
    y = _check_labels(z, y)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != y.shape:
        raise ShapeError("weights do not match the batch size", expected=y.shape[0], actual=list(w.shape))
    if w.size and not (w > 0).all():
        raise ValidationError("reweighting weights must be positive")
    losses, grad = _ce_rows(z, y)
    n = z.shape[0]
    grad = grad * w.astype(z.dtype)[:, None]
    return float(np.mean(w * losses)), grad / n
