"""Stable reductions and the finite-difference checker."""

import numpy as np
import pytest

from numerics.gradcheck import finite_difference_check, relative_error
from numerics.tensor import argmax_first, as_tensor, ensure_finite, log_softmax, log_sum_exp, softmax
from utils.error_handlers import ContractError, NumericError, ShapeError


class TestLogSumExp:

    def test_matches_naive_on_moderate_values(self, rng):
        v = rng.normal(size=20)
        assert log_sum_exp(v) == pytest.approx(np.log(np.sum(np.exp(v))), rel=1e-12)

    def test_large_values_do_not_overflow(self):
        assert log_sum_exp(np.array([1000.0, 1000.0])) == pytest.approx(1000.0 + np.log(2.0))

    def test_all_negative_infinity_stays_negative_infinity(self):
        assert log_sum_exp(np.array([-np.inf, -np.inf])) == -np.inf

    def test_rows_of_a_matrix(self, rng):
        m = rng.normal(size=(5, 3))
        np.testing.assert_allclose(log_sum_exp(m, axis=1), np.log(np.exp(m).sum(axis=1)), rtol=1e-12)

    def test_empty_input_is_rejected(self):
        with pytest.raises(ContractError):
            log_sum_exp(np.array([]))


class TestSoftmax:

    def test_shift_invariance(self, rng):
        v = rng.normal(size=7)
        np.testing.assert_allclose(softmax(v), softmax(v + 123.4), atol=1e-15)

    def test_rows_sum_to_one(self, rng):
        p = softmax(rng.normal(size=(10, 4)) * 30, axis=1)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_log_softmax_agrees(self, rng):
        v = rng.normal(size=(3, 5))
        np.testing.assert_allclose(log_softmax(v, axis=1), np.log(softmax(v, axis=1)), atol=1e-12)

    def test_empty_input_is_rejected(self):
        with pytest.raises(ContractError):
            softmax(np.zeros((2, 0)), axis=1)


class TestHelpers:

    def test_argmax_breaks_ties_toward_smallest_index(self):
        assert argmax_first(np.array([1.0, 3.0, 3.0])) == 1
        np.testing.assert_array_equal(argmax_first(np.array([[2.0, 2.0], [0.0, 1.0]]), axis=1), [0, 1])

    def test_ensure_finite_names_the_index(self):
        with pytest.raises(NumericError) as info:
            ensure_finite(np.array([[1.0, 2.0], [np.nan, 0.0]]), 'weights')
        assert info.value.details['index'] == [1, 0]
        assert 'weights' in info.value.message

    def test_as_tensor_is_contiguous(self):
        out = as_tensor(np.arange(6).reshape(2, 3).T, dtype='float32')
        assert out.flags['C_CONTIGUOUS']
        assert out.dtype == np.float32


class TestFiniteDifferenceCheck:

    def test_quadratic_passes(self, rng):
        a = rng.normal(size=(3, 3))
        a = a @ a.T
        x = rng.normal(size=3)
        report = finite_difference_check(lambda p: 0.5 * p @ a @ p, x, a @ x)
        assert report.passed(1e-6)

    def test_wrong_gradient_is_reported_at_its_coordinate(self):
        x = np.array([1.0, 2.0, 3.0])
        grad = 2 * x
        grad[2] += 1.0
        report = finite_difference_check(lambda p: float(np.sum(p ** 2)), x, grad)
        assert report.worst_coordinate == (2,)
        assert not report.passed()

    def test_point_is_not_modified(self):
        x = np.array([0.5, -0.5])
        finite_difference_check(lambda p: float(p.sum()), x, np.ones(2))
        np.testing.assert_array_equal(x, [0.5, -0.5])

    def test_scalar_point(self):
        report = finite_difference_check(lambda p: float(p ** 3), np.array(2.0), np.array(12.0))
        assert report.worst_coordinate == ()
        assert report.passed()

    def test_rejects_bad_arguments(self):
        with pytest.raises(ContractError):
            finite_difference_check(lambda p: 0.0, np.zeros(2), np.zeros(2), step=0.0)
        with pytest.raises(ShapeError):
            finite_difference_check(lambda p: 0.0, np.zeros(2), np.zeros(3))
        with pytest.raises(ContractError):
            finite_difference_check(lambda p: 0.0, np.zeros(0), np.zeros(0))

    def test_non_finite_function_value(self):
        with pytest.raises(NumericError):
            finite_difference_check(lambda p: float(np.log(p[0])), np.array([0.0]), np.array([1.0]))

    def test_relative_error_floor(self):
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1e-12, 0.0) == pytest.approx(1e-4)
