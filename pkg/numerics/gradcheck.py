"""
Central finite-difference gradient checker.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from numerics.tensor import Tensor
from utils.error_handlers import ContractError, NumericError, ShapeError

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-8


@dataclass(frozen=True)
class GradCheckReport:
    """Worst coordinate of a gradient comparison."""

    max_relative_error: float
    worst_coordinate: Tuple[int, ...]
    analytic: float
    numeric: float

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), DENOMINATOR_FLOOR)


def finite_difference_check(f: Callable[[Tensor], float], point: Tensor, analytic_grad: Tensor,
                            step: float = 1e-5) -> GradCheckReport:
    """
    Compare an analytic gradient against central finite differences.

    Args:
        f: Scalar-valued function of an array shaped like point
        point: Evaluation point (not modified)
        analytic_grad: Claimed gradient of f at point
        step: Perturbation size, must be positive

    Returns:
        GradCheckReport for the coordinate with the largest relative error
    """
    if not step > 0:
        raise ContractError(f"finite difference step must be positive, got {step}")

    base = np.array(point, dtype=np.float64, copy=True)
    analytic_grad = np.asarray(analytic_grad, dtype=np.float64)
    if base.shape != analytic_grad.shape:
        raise ShapeError("analytic gradient shape differs from point shape",
                         expected=list(base.shape), actual=list(analytic_grad.shape))

    worst = None
    for index in np.ndindex(*base.shape):
        original = base[index]

        base[index] = original + step
        f_plus = float(f(base))
        base[index] = original - step
        f_minus = float(f(base))
        base[index] = original

        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"Non-finite function value while perturbing coordinate {index}",
                               details={'coordinate': list(index)})

        numeric = (f_plus - f_minus) / (2.0 * step)
        analytic = float(analytic_grad[index])
        err = relative_error(analytic, numeric)
        if worst is None or err > worst.max_relative_error:
            worst = GradCheckReport(err, tuple(int(i) for i in index), analytic, numeric)

    if worst is None:
        raise ContractError("finite difference check of an empty point")

    if worst.max_relative_error >= 1e-4:
        logger.debug(f"Gradient check worst coordinate {worst.worst_coordinate}: "
                     f"analytic {worst.analytic:.6g} numeric {worst.numeric:.6g}")
    return worst
