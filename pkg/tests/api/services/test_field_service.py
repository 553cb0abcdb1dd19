import unittest
from unittest.mock import patch

import jax.numpy as jnp
import numpy as np

from api.services.field_service import FieldService
from core.exceptions import DimensionMismatch, JetOrderExceeded, NonZeroMean, NotPeriodic, OrderExceeded
from core.fields import FieldHandle, PeriodAverage, TimeIntegral, TimeScaled
from core.matrices import MatrixFunction
from schemas.fields import AntiderivativeMode, QuadratureRule

TWO_PI = 2.0 * np.pi


def quadratic():
    return FieldHandle(
        lambda x, t: jnp.stack([x[..., 0] ** 2, x[..., 0] * x[..., 1]], axis=-1),
        2,
        autonomous=True,
        name="quadratic",
    )


def harmonic(matrix, k):
    """cos(k t) M x, zero-mean and 2 pi periodic."""
    m = jnp.asarray(matrix)
    return FieldHandle(
        lambda x, t: jnp.cos(k * t)[..., None] * (x @ m.T), 2, period=TWO_PI, name=f"cos{k}t"
    )


def two_tone(matrix, cos_k, sin_k):
    """(cos(cos_k t) + sin(sin_k t)) M x, zero-mean and 2 pi periodic."""
    m = jnp.asarray(matrix)
    return FieldHandle(
        lambda x, t: (jnp.cos(cos_k * t) + jnp.sin(sin_k * t))[..., None] * (x @ m.T),
        2,
        period=TWO_PI,
        name=f"cos{cos_k}t+sin{sin_k}t",
    )


def wavy():
    return FieldHandle(
        lambda x, t: jnp.stack(
            [jnp.sin(x[..., 0] * x[..., 1]) + t * x[..., 1] ** 2, jnp.exp(x[..., 0]) * x[..., 1] ** 3],
            axis=-1,
        ),
        2,
        name="wavy",
    )


class TestLieBracketService(unittest.TestCase):
    def test_linear_fields_give_the_matrix_commutator(self):
        a = np.array([[0.0, 1.0], [2.0, 0.0]])
        b = np.array([[1.0, 0.0], [0.0, -3.0]])
        p = FieldHandle(lambda x, t: x @ jnp.asarray(a).T, 2, autonomous=True)
        q = FieldHandle(lambda x, t: x @ jnp.asarray(b).T, 2, autonomous=True)
        x = np.array([0.3, -1.1])
        value = FieldService.eval_field(FieldService.lie_bracket(p, q), x, 0.0).value
        np.testing.assert_allclose(value, (a @ b - b @ a) @ x, atol=1e-13)

    def test_antisymmetric(self):
        p, q = quadratic(), harmonic([[0.0, 1.0], [-1.0, 0.0]], 1)
        x = np.array([0.4, 0.9])
        pq = FieldService.eval_field(FieldService.lie_bracket(p, q), x, 0.7).value
        qp = FieldService.eval_field(FieldService.lie_bracket(q, p), x, 0.7).value
        np.testing.assert_allclose(pq, -qp, atol=1e-13)

    def test_jacobi_identity(self):
        p, q, r = quadratic(), harmonic([[0.0, 1.0], [-1.0, 0.0]], 1), wavy()
        x = np.array([0.4, -0.6])
        total = sum(
            np.asarray(
                FieldService.eval_field(
                    FieldService.lie_bracket(FieldService.lie_bracket(a, b), c), x, 0.9
                ).value
            )
            for a, b, c in ((p, q, r), (q, r, p), (r, p, q))
        )
        self.assertLess(float(np.linalg.norm(total)), 1e-9)


class TestEvalField(unittest.TestCase):
    def test_value_and_derivatives(self):
        jet = FieldService.eval_field(quadratic(), [1.0, 2.0], 0.0, 2)
        np.testing.assert_allclose(jet.value, [1.0, 2.0])
        np.testing.assert_allclose(jet.jacobian, [[2.0, 0.0], [2.0, 1.0]])
        hessians = jet.derivs[1]
        self.assertEqual(hessians.shape, (2, 2, 2))
        self.assertEqual(hessians[0, 0, 0], 2.0)
        self.assertEqual(hessians[1, 0, 1], 1.0)
        self.assertEqual(hessians[1, 1, 0], 1.0)
        self.assertEqual(hessians[1, 1, 1], 0.0)

    def test_order_zero_has_no_derivatives(self):
        jet = FieldService.eval_field(quadratic(), [1.0, 2.0])
        self.assertEqual(jet.order, 0)
        with self.assertRaises(ValueError):
            jet.jacobian

    def test_jet_order_capped_by_settings(self):
        with patch("api.services.field_service.settings.MAX_JET_ORDER", 1):
            with self.assertRaises(JetOrderExceeded):
                FieldService.eval_field(quadratic(), [1.0, 2.0], 0.0, 2)

    def test_jet_order_capped_by_field(self):
        f = FieldHandle(lambda x, t: x, 2, autonomous=True, jet_capacity=1)
        with self.assertRaises(JetOrderExceeded):
            FieldService.eval_field(f, [1.0, 2.0], 0.0, 2)

    def test_higher_derivatives_are_symmetric(self):
        jet = FieldService.eval_field(wavy(), [0.7, -0.4], 0.3, 3)
        second, third = np.asarray(jet.derivs[1]), np.asarray(jet.derivs[2])
        np.testing.assert_allclose(second, second.transpose(0, 2, 1), atol=1e-12)
        for axes in ((0, 2, 1, 3), (0, 1, 3, 2), (0, 3, 2, 1)):
            np.testing.assert_allclose(third, third.transpose(axes), atol=1e-12)

    def test_untraceable_field_has_no_jets(self):
        f = FieldHandle(lambda x, t: np.asarray(x), 2, autonomous=True, traceable=False)
        self.assertEqual(FieldService.eval_field(f, [1.0, 2.0]).value.shape, (2,))
        with self.assertRaises(JetOrderExceeded):
            FieldService.eval_field(f, [1.0, 2.0], 0.0, 1)

    def test_dimension_checked(self):
        with self.assertRaises(DimensionMismatch):
            FieldService.eval_field(quadratic(), [1.0, 2.0, 3.0])

    def test_matches_finite_differences(self):
        g = harmonic([[0.0, 1.0], [-1.0, 0.3]], 1)
        x = np.array([0.4, -0.9])
        jet = FieldService.eval_field(g, x, 0.8, 1)
        np.testing.assert_allclose(
            jet.jacobian, FieldService.finite_difference_jacobian(g, x, 0.8), atol=1e-8
        )


class TestAntiderivative(unittest.TestCase):
    def test_autonomous_field_scales_with_time(self):
        w = FieldService.antiderivative(quadratic())
        self.assertIsInstance(w, TimeScaled)
        np.testing.assert_allclose(np.asarray(w([1.0, 2.0], 3.0)), [3.0, 6.0])

    def test_time_dependent_field_uses_quadrature(self):
        g = harmonic(np.eye(2), 1)
        w = FieldService.antiderivative(g)
        self.assertIsInstance(w, TimeIntegral)
        np.testing.assert_allclose(np.asarray(w([1.0, 2.0], 1.2)), np.sin(1.2) * np.array([1.0, 2.0]), atol=1e-14)
        np.testing.assert_allclose(np.asarray(w([1.0, 2.0], 0.0)), [0.0, 0.0])

    def test_distributes_over_combinations(self):
        f = quadratic() + harmonic(np.eye(2), 1)
        w = FieldService.antiderivative(f)
        x = np.array([1.0, 2.0])
        expected = 2.0 * np.array([1.0, 2.0]) + np.sin(2.0) * x
        np.testing.assert_allclose(np.asarray(w(x, 2.0)), expected, atol=1e-13)

    def test_zero_mean_fourier(self):
        mode = AntiderivativeMode.zero_mean_fourier()
        w = FieldService.antiderivative(harmonic(np.eye(2), 2), mode)
        x = np.array([1.0, -1.0])
        np.testing.assert_allclose(np.asarray(w(x, 0.7)), np.sin(1.4) / 2.0 * x, atol=1e-13)

    def test_zero_mean_fourier_is_periodic_with_zero_mean(self):
        m = np.array([[0.5, -1.0], [2.0, 0.3]])
        f = two_tone(m, 1, 2)
        w = FieldService.antiderivative(f, AntiderivativeMode.zero_mean_fourier())
        x = np.array([0.8, -0.2])
        for t in (0.0, 0.7, 4.1):
            np.testing.assert_allclose(
                np.asarray(w(x, t)), (np.sin(t) - np.cos(2.0 * t) / 2.0) * (m @ x), atol=1e-12
            )
            np.testing.assert_allclose(np.asarray(w(x, t + TWO_PI)), np.asarray(w(x, t)), atol=1e-12)
            h = 1e-5
            slope = (np.asarray(w(x, t + h)) - np.asarray(w(x, t - h))) / (2.0 * h)
            np.testing.assert_allclose(slope, np.asarray(f(x, t)), atol=1e-8)
        mean = FieldService.average(w, TWO_PI, QuadratureRule.trigonometric())
        np.testing.assert_allclose(np.asarray(mean(x)), [0.0, 0.0], atol=1e-12)

    def test_zero_mean_fourier_rejects_non_zero_mean(self):
        f = harmonic(np.eye(2), 1) + quadratic()
        with self.assertRaises(NonZeroMean):
            FieldService.antiderivative(f, AntiderivativeMode.zero_mean_fourier())

    def test_zero_mean_fourier_needs_a_period(self):
        g = FieldHandle(lambda x, t: t[..., None] * x, 2, name="t*x")
        with self.assertRaises(NotPeriodic):
            FieldService.antiderivative(g, AntiderivativeMode.zero_mean_fourier())

    def test_zero_mean_fourier_rejects_wrong_period(self):
        with self.assertRaises(NotPeriodic):
            FieldService.antiderivative(
                harmonic(np.eye(2), 1), AntiderivativeMode.zero_mean_fourier(period=3.0)
            )


class TestAverage(unittest.TestCase):
    def test_average_drops_oscillating_terms(self):
        f = harmonic(np.eye(2), 1) + quadratic()
        averaged = FieldService.average(f)
        self.assertTrue(averaged.autonomous)
        x = np.array([0.5, 1.5])
        np.testing.assert_allclose(np.asarray(averaged(x)), [0.25, 0.75], atol=1e-13)

    def test_autonomous_field_is_its_own_average(self):
        f = quadratic()
        self.assertIs(FieldService.average(f, TWO_PI), f)

    def test_average_of_squared_cosine(self):
        g = FieldHandle(
            lambda x, t: jnp.cos(t)[..., None] ** 2 * x, 2, period=TWO_PI, name="cos^2 x"
        )
        averaged = FieldService.average(g)
        self.assertIsInstance(averaged, PeriodAverage)
        np.testing.assert_allclose(np.asarray(averaged([2.0, 4.0])), [1.0, 2.0], atol=1e-13)

    def test_average_needs_a_period(self):
        g = FieldHandle(lambda x, t: t[..., None] * x, 2, name="t*x")
        with self.assertRaises(NotPeriodic):
            FieldService.average(g)


class TestPreLie(unittest.TestCase):
    def test_prelie_of_linear_fields(self):
        a = MatrixFunction.polynomial([[[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]])
        f = FieldService.linear_field(a)
        product = FieldService.prelie(f, f)
        x = np.array([1.0, 2.0])
        t = 1.5
        expected = np.asarray(a.prelie(a, QuadratureRule()).at(t)) @ x
        np.testing.assert_allclose(np.asarray(product(x, t)), expected, atol=1e-13)

    def test_identity_on_polynomial_linear_fields(self):
        rng = np.random.default_rng(3)
        for _ in range(3):
            f, g, h = (
                FieldService.linear_field(MatrixFunction.polynomial(rng.standard_normal((3, 2, 2))))
                for _ in range(3)
            )
            residual = FieldService.prelie_identity_residual(f, g, h, rng.standard_normal(2), 0.9)
            self.assertLess(residual, 1e-9)

    def test_identity_on_nonlinear_fields(self):
        g = harmonic([[0.0, 1.0], [-1.0, 0.0]], 1)
        residual = FieldService.prelie_identity_residual(
            quadratic(), g, quadratic() + g, np.array([0.3, -0.2]), 0.6
        )
        self.assertLess(residual, 1e-9)

    def test_identity_with_zero_mean_fourier(self):
        rng = np.random.default_rng(5)
        f, g, h = (harmonic(rng.standard_normal((2, 2)), k) for k in (1, 2, 3))
        residual = FieldService.prelie_identity_residual(
            f, g, h, np.array([0.5, 1.0]), 1.3, mode=AntiderivativeMode.zero_mean_fourier()
        )
        self.assertLess(residual, 1e-8)

    def test_identity_with_zero_mean_fourier_sines_and_mixed_harmonics(self):
        rng = np.random.default_rng(7)
        m = jnp.asarray(rng.standard_normal((2, 2)))
        f = FieldHandle(
            lambda x, t: jnp.sin(2.0 * t)[..., None] * (x @ m.T),
            2,
            period=TWO_PI,
            name="sin2t",
        )
        g = two_tone(rng.standard_normal((2, 2)), 4, 3)
        h = two_tone(rng.standard_normal((2, 2)), 5, 6)
        residual = FieldService.prelie_identity_residual(
            f, g, h, np.array([-0.4, 0.9]), 2.1, mode=AntiderivativeMode.zero_mean_fourier()
        )
        self.assertLess(residual, 1e-8)


class TestTransport(unittest.TestCase):
    def test_first_orders(self):
        r1 = harmonic(np.eye(2), 1)
        f1 = quadratic()
        terms = FieldService.transport_coefficients([r1], f1, 1)
        self.assertEqual(terms.role, "V")
        x = np.array([0.2, 0.4])
        np.testing.assert_allclose(
            np.asarray(terms.term(1)(x, 0.5)), np.asarray(r1(x, 0.5)) + np.asarray(f1(x, 0.5))
        )

    def test_magnus_rates_transport_back_to_the_field(self):
        g = harmonic([[0.0, 1.0], [-1.0, 0.0]], 1) + quadratic()

        def rhd(p, q):
            return FieldService.prelie(p, q)

        rates = [g, -0.5 * rhd(g, g)]
        transported = FieldService.transport_rhs(rates, None, 2, eps=0.1)
        x = np.array([0.3, 0.1])
        np.testing.assert_allclose(
            np.asarray(transported(x, 0.4)), 0.1 * np.asarray(g(x, 0.4)), atol=1e-13
        )

    def test_order_needs_enough_rates(self):
        with self.assertRaises(OrderExceeded):
            FieldService.transport_coefficients([quadratic()], None, 2)


class TestLinearField(unittest.TestCase):
    def test_constant_matrix_gives_autonomous_field(self):
        f = FieldService.linear_field(MatrixFunction.from_constant(np.array([[1.0, 2.0], [3.0, 4.0]])))
        self.assertTrue(f.autonomous)
        np.testing.assert_allclose(np.asarray(f([1.0, 1.0])), [3.0, 7.0])

    def test_complex_matrix_rejected(self):
        with self.assertRaises(ValueError):
            FieldService.linear_field(MatrixFunction.from_constant(1j * np.eye(2)))


if __name__ == "__main__":
    unittest.main()
