"""
Adam optimizer with bias correction and a step-decay learning-rate schedule.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from numerics.tensor import Tensor
from utils.error_handlers import ShapeError, ValidationError

logger = logging.getLogger(__name__)

DecaySchedule = Tuple[Tuple[int, float], ...]


@dataclass
class AdamState:
    """
    Optimizer state for one parameter list.

    Attributes:
        learning_rate: Base learning rate before scheduling
        beta1: First-moment decay
        beta2: Second-moment decay
        epsilon: Denominator term
        decay_schedule: (iteration, factor) pairs; a factor applies once step_count exceeds its iteration
        weight_decay: Decoupled decay; each step also shrinks parameters by lr * weight_decay * p
        cosine_steps: If set, cosine-anneal the scheduled rate to zero over this many steps
        step_count: Number of updates applied so far
        first_moment: Per-parameter running mean of gradients
        second_moment: Per-parameter running mean of squared gradients
    """

    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    decay_schedule: DecaySchedule = ((10000, 0.5),)
    weight_decay: float = 0.0
    cosine_steps: Optional[int] = None
    step_count: int = 0
    first_moment: List[Tensor] = field(default_factory=list)
    second_moment: List[Tensor] = field(default_factory=list)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValidationError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValidationError(f"betas must lie in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if self.weight_decay < 0:
            raise ValidationError(f"weight_decay must be non-negative, got {self.weight_decay}")
        self.decay_schedule = tuple((int(it), float(f)) for it, f in self.decay_schedule)

    @classmethod
    def for_parameters(cls, params: Sequence[Tensor], **kwargs) -> 'AdamState':
        """Zero-initialized moments shaped like params."""
        state = cls(**kwargs)
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
        return state


def scheduled_learning_rate(state: AdamState, step: int) -> float:
    """
    Effective learning rate for the update numbered `step` (1-based).

    Args:
        state: Optimizer state holding the base rate and schedule
        step: Update number

    Returns:
        Learning rate after step decay and optional cosine annealing
    """
    lr = float(state.learning_rate)
    for iteration, factor in state.decay_schedule:
        if step > iteration:
            lr *= factor
    if state.cosine_steps:
        progress = min(step - 1, state.cosine_steps) / state.cosine_steps
        lr *= 0.5 * (1.0 + math.cos(math.pi * progress))
    return lr


def adam_step(state: AdamState, params: Sequence[Tensor],
              grads: Sequence[Tensor]) -> Tuple[List[Tensor], AdamState]:
    """
    Apply one bias-corrected Adam update.

    Args:
        state: Current optimizer state (not modified)
        params: Parameter arrays
        grads: Gradients shaped like params

    Returns:
        Tuple of (new parameter arrays, new state)
    """
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length", expected=len(params), actual=len(grads))

    first = state.first_moment or [np.zeros_like(p) for p in params]
    second = state.second_moment or [np.zeros_like(p) for p in params]
    if len(first) != len(params):
        raise ShapeError("optimizer moments do not match the parameter list",
                         expected=len(first), actual=len(params))

    step = state.step_count + 1
    lr = scheduled_learning_rate(state, step)
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** step
    correction2 = 1.0 - b2 ** step

    new_params, new_first, new_second = [], [], []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or p.shape != first[i].shape:
            raise ShapeError(f"parameter {i} shape mismatch", expected=list(p.shape), actual=list(np.shape(g)))
        g = np.asarray(g, dtype=p.dtype)
        m = b1 * first[i] + (1.0 - b1) * g
        v = b2 * second[i] + (1.0 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2

        update = m_hat / (np.sqrt(v_hat) + state.epsilon)
        if state.weight_decay:
            update = update + state.weight_decay * p
        new_params.append((p - lr * update).astype(p.dtype, copy=False))
        new_first.append(m.astype(p.dtype, copy=False))
        new_second.append(v.astype(p.dtype, copy=False))

    return new_params, replace(state, step_count=step, first_moment=new_first, second_moment=new_second)


class Adam:
    """Stateful wrapper that owns an AdamState for a single model."""

    def __init__(self, params: Sequence[Tensor], learning_rate: float = 1e-2,
                 decay_schedule: DecaySchedule = ((10000, 0.5),), weight_decay: float = 0.0,
                 cosine_steps: Optional[int] = None, epsilon: float = 1e-8):
        self.state = AdamState.for_parameters(
            params,
            learning_rate=learning_rate,
            decay_schedule=decay_schedule,
            weight_decay=weight_decay,
            cosine_steps=cosine_steps,
            epsilon=epsilon,
        )

    @property
    def step_count(self) -> int:
        return self.state.step_count

    @property
    def current_learning_rate(self) -> float:
        return scheduled_learning_rate(self.state, self.state.step_count + 1)

    def step(self, params: Sequence[Tensor], grads: Sequence[Tensor]) -> List[Tensor]:
        new_params, self.state = adam_step(self.state, params, grads)
        return new_params
