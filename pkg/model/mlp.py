"""
Multi-layer perceptron scorer with hand-derived backpropagation.

Both training branches use a separate MlpScorer; nothing is shared between
instances.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from numerics.tensor import Tensor, ensure_finite
from utils.error_handlers import ContractError, ShapeError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN_WIDTH = 100
DEFAULT_HIDDEN_LAYERS = 3


@dataclass
class MlpGradients:
    """Per-layer parameter gradients, aligned with MlpScorer.weights/biases."""

    weights: List[Tensor]
    biases: List[Tensor]

    def flat(self) -> List[Tensor]:
        """Interleaved [dW0, db0, dW1, db1, ...] matching MlpScorer.parameters()."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


class MlpScorer:
    """
    Fully connected network with ReLU hidden layers and a linear output.

    Weights are stored as (fan_in, fan_out) so a batch computes x @ W + b.
    """

    def __init__(self, layer_dims: Sequence[int], seed: int = 0, dtype=np.float32):
        """
        Initialize a scorer.

        Args:
            layer_dims: [d_in, h_1, ..., n_classes]; at least input and output
            seed: Seed for He-uniform weight initialization
            dtype: Parameter and activation precision
        """
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValidationError(f"layer_dims must list at least two positive sizes, got {dims}")

        self.layer_dims = dims
        self.dtype = np.dtype(dtype)
        self.seed = seed

        rng = np.random.default_rng(seed)
        self.weights: List[Tensor] = []
        self.biases: List[Tensor] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.weights.append(np.ascontiguousarray(w, dtype=self.dtype))
            self.biases.append(np.zeros(fan_out, dtype=self.dtype))

        self._cache: Optional[Tuple[List[Tensor], List[Tensor]]] = None

    @classmethod
    def build(cls, d_in: int, n_classes: int, hidden_width: int = DEFAULT_HIDDEN_WIDTH,
              hidden_layers: int = DEFAULT_HIDDEN_LAYERS, seed: int = 0, dtype=np.float32) -> 'MlpScorer':
        """Standard backbone: d_in -> hidden x3 -> n_classes."""
        dims = [d_in] + [hidden_width] * hidden_layers + [n_classes]
        return cls(dims, seed=seed, dtype=dtype)

    @classmethod
    def from_parameters(cls, weights: Sequence[Tensor], biases: Sequence[Tensor]) -> 'MlpScorer':
        """Create a scorer around existing parameter arrays (copied)."""
        if len(weights) != len(biases) or not weights:
            raise ValidationError("weights and biases must be non-empty and of equal length")
        dims = [int(weights[0].shape[0])] + [int(w.shape[1]) for w in weights]
        model = cls.__new__(cls)
        model.layer_dims = dims
        model.dtype = np.dtype(weights[0].dtype)
        model.seed = None
        model.weights = [np.array(w, dtype=model.dtype, order='C') for w in weights]
        model.biases = [np.array(b, dtype=model.dtype) for b in biases]
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise ShapeError(f"layer {i} parameter shapes do not chain",
                                 expected=[dims[i], dims[i + 1]], actual=list(w.shape))
        model._cache = None
        return model

    @property
    def n_inputs(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def _check_input(self, batch: Tensor) -> Tensor:
        x = np.asarray(batch, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            actual = x.shape[1] if x.ndim == 2 else list(x.shape)
            raise ShapeError(f"expected input dimension d={self.n_inputs}, got d={actual}",
                             expected=self.n_inputs, actual=actual)
        return x

    def forward(self, batch: Tensor, cache: bool = True) -> Tensor:
        """
        Compute logits for a batch.

        Args:
            batch: Inputs of shape (n, d_in)
            cache: Keep activations for a following backward call

        Returns:
            Logits of shape (n, n_classes)
        """
        h = self._check_input(batch)
        inputs = []
        pre_activations = []
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            if i < last:
                pre_activations.append(z)
                h = np.maximum(z, 0)
            else:
                h = z

        self._cache = (inputs, pre_activations) if cache else None
        return h

    def predict(self, batch: Tensor) -> Tensor:
        """Forward pass without caching; safe on a shared snapshot."""
        h = self._check_input(batch)
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0)
        return h

    def backward(self, upstream_grad: Tensor) -> Tuple[MlpGradients, Tensor]:
        """
        Backpropagate d(loss)/d(logits) through the cached forward pass.

        Args:
            upstream_grad: Gradient w.r.t. logits, shape (n, n_classes)

        Returns:
            Tuple of (parameter gradients, gradient w.r.t. the input batch)
        """
        if self._cache is None:
            raise ContractError("backward called without a cached forward pass")

        inputs, pre_activations = self._cache
        g = np.asarray(upstream_grad, dtype=self.dtype)
        expected = (inputs[0].shape[0], self.n_classes)
        if g.shape != expected:
            raise ShapeError("upstream gradient shape does not match the cached logits",
                             expected=list(expected), actual=list(g.shape))

        grad_w: List[Optional[Tensor]] = [None] * self.n_layers
        grad_b: List[Optional[Tensor]] = [None] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            grad_w[i] = inputs[i].T @ g
            grad_b[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (pre_activations[i - 1] > 0)

        return MlpGradients(grad_w, grad_b), g

    def parameters(self) -> List[Tensor]:
        """Interleaved [W0, b0, W1, b1, ...] views of the live parameters."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def load_parameters(self, params: Sequence[Tensor]) -> None:
        """Replace parameters from an interleaved list as returned by parameters()."""
        if len(params) != 2 * self.n_layers:
            raise ShapeError("parameter list length does not match the network",
                             expected=2 * self.n_layers, actual=len(params))
        for i in range(self.n_layers):
            w = np.asarray(params[2 * i], dtype=self.dtype)
            b = np.asarray(params[2 * i + 1], dtype=self.dtype)
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ShapeError(f"layer {i} parameter shape mismatch",
                                 expected=list(self.weights[i].shape), actual=list(w.shape))
            self.weights[i] = ensure_finite(w, f"layer {i} weights")
            self.biases[i] = ensure_finite(b, f"layer {i} biases")
        self._cache = None

    def copy(self) -> 'MlpScorer':
        return MlpScorer.from_parameters(self.weights, self.biases)
