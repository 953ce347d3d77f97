"""Core numerics: stable reductions and gradient checking."""

from numerics.tensor import (
    Tensor,
    argmax_first,
    as_tensor,
    ensure_finite,
    log_softmax,
    log_sum_exp,
    softmax,
)
from numerics.gradcheck import GradCheckReport, finite_difference_check

__all__ = [
    'Tensor',
    'argmax_first',
    'as_tensor',
    'ensure_finite',
    'log_softmax',
    'log_sum_exp',
    'softmax',
    'GradCheckReport',
    'finite_difference_check',
]
