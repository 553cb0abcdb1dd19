import unittest

import jax.numpy as jnp
import numpy as np

from core.exceptions import DimensionMismatch, JetOrderExceeded
from core.fields import (
    FieldHandle,
    FourierAntiderivative,
    LieBracket,
    LinearCombination,
    PeriodAverage,
    SeriesEvaluator,
    TimeIntegral,
    TimeScaled,
    common_period,
    same_period,
)
from schemas.fields import QuadratureRule

A = jnp.array([[0.0, 1.0], [-2.0, 0.5]])
B = jnp.array([[1.0, 0.0], [3.0, -1.0]])


def linear(matrix, name):
    return FieldHandle(lambda x, t: x @ matrix.T, 2, autonomous=True, name=name)


def modulated(matrix, period=2.0 * np.pi):
    return FieldHandle(
        lambda x, t: jnp.cos(2.0 * np.pi * t / period)[..., None] * (x @ matrix.T),
        2,
        period=period,
        name="cos*A",
    )


class TestFieldHandle(unittest.TestCase):
    def test_dimension_checked(self):
        with self.assertRaises(DimensionMismatch):
            linear(A, "a")(np.ones(3))
        with self.assertRaises(DimensionMismatch):
            FieldHandle(lambda x, t: x, 0)

    def test_batched_evaluation(self):
        f = modulated(A)
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        values = np.asarray(f(x, np.array([0.0, np.pi])))
        np.testing.assert_allclose(values[0], np.asarray(A)[:, 0])
        np.testing.assert_allclose(values[1], -np.asarray(A)[:, 1], atol=1e-15)

    def test_zero_field(self):
        zero = FieldHandle.zero(3)
        np.testing.assert_array_equal(np.asarray(zero(np.ones(3))), np.zeros(3))

    def test_periods(self):
        self.assertTrue(same_period(2.0, 2.0 + 1e-14))
        self.assertIsNone(common_period([linear(A, "a"), linear(B, "b")]))
        self.assertEqual(common_period([linear(A, "a"), modulated(B, 3.0)]), 3.0)


class TestLinearCombination(unittest.TestCase):
    def test_flattens_and_drops_zeros(self):
        f, g = linear(A, "a"), linear(B, "b")
        combo = 2.0 * (f + g) - 2.0 * g
        self.assertIsInstance(combo, LinearCombination)
        self.assertEqual(len(combo.terms), 3)
        x = np.array([0.3, -1.2])
        np.testing.assert_allclose(np.asarray(combo(x)), 2.0 * np.asarray(A) @ x, atol=1e-14)

    def test_dimensions_must_agree(self):
        with self.assertRaises(DimensionMismatch):
            linear(A, "a") + FieldHandle.zero(3)

    def test_rejects_non_fields(self):
        with self.assertRaises(TypeError):
            LinearCombination.of([(1.0, np.eye(2))])


class TestTimeNodes(unittest.TestCase):
    def setUp(self):
        self.nodes, self.weights = QuadratureRule().unit()

    def test_time_scaled(self):
        f = linear(A, "a")
        x = np.array([1.0, 2.0])
        np.testing.assert_allclose(np.asarray(TimeScaled(f)(x, 1.5)), 1.5 * np.asarray(A) @ x)

    def test_time_integral_of_cosine(self):
        integral = TimeIntegral(modulated(A), self.nodes, self.weights)
        x = np.array([1.0, -1.0])
        t = 2.0
        np.testing.assert_allclose(
            np.asarray(integral(x, t)), np.sin(t) * np.asarray(A) @ x, atol=1e-13
        )

    def test_fourier_antiderivative(self):
        primitive = FourierAntiderivative(modulated(A), 2.0 * np.pi, 4)
        x = np.array([0.5, 2.0])
        for t in (0.0, 1.1, 4.0):
            np.testing.assert_allclose(
                np.asarray(primitive(x, t)), np.sin(t) * np.asarray(A) @ x, atol=1e-13
            )

    def test_period_average(self):
        f = modulated(A) + linear(B, "b")
        nodes, weights = QuadratureRule.trigonometric().unit()
        averaged = PeriodAverage(f, 2.0 * np.pi, nodes, weights)
        self.assertTrue(averaged.autonomous)
        x = np.array([1.0, 1.0])
        np.testing.assert_allclose(np.asarray(averaged(x)), np.asarray(B) @ x, atol=1e-13)


class TestLieBracket(unittest.TestCase):
    def test_linear_fields_give_the_commutator(self):
        bracket = LieBracket(linear(A, "a"), linear(B, "b"))
        x = np.array([0.7, -0.4])
        expected = (np.asarray(A) @ np.asarray(B) - np.asarray(B) @ np.asarray(A)) @ x
        np.testing.assert_allclose(np.asarray(bracket(x)), expected, atol=1e-14)

    def test_batched_bracket(self):
        bracket = LieBracket(modulated(A), linear(B, "b"))
        x = np.random.default_rng(1).standard_normal((4, 2))
        t = np.linspace(0.0, 1.0, 4)
        values = np.asarray(bracket(x, t))
        for i in range(4):
            np.testing.assert_allclose(values[i], np.asarray(bracket(x[i], t[i])), atol=1e-13)

    def test_jet_capacity_decreases(self):
        f = FieldHandle(lambda x, t: x, 2, autonomous=True, jet_capacity=1)
        self.assertEqual(LieBracket(f, f).jet_capacity, 0)
        with self.assertRaises(JetOrderExceeded):
            LieBracket(LieBracket(f, f), f)


class TestSeriesEvaluator(unittest.TestCase):
    def test_weighted_sum_and_frozen_time(self):
        evaluator = SeriesEvaluator([linear(A, "a"), modulated(B)])
        x = np.array([1.0, 2.0])
        rhs = evaluator.rhs([2.0, 0.5], frozen_time=np.pi)
        expected = 2.0 * np.asarray(A) @ x - 0.5 * np.asarray(B) @ x
        np.testing.assert_allclose(rhs(0.0, x), expected, atol=1e-13)

    def test_weight_count_checked(self):
        with self.assertRaises(DimensionMismatch):
            SeriesEvaluator([linear(A, "a")]).rhs([1.0, 2.0])


if __name__ == "__main__":
    unittest.main()
