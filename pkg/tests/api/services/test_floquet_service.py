import unittest

import numpy as np
import pytest

from api.services.floquet_service import FloquetService
from api.services.magnus_linear_service import MagnusLinearService
from api.services.odeint_service import OdeintService
from api.services.system_service import SystemService
from core.exceptions import NotPeriodic, OrderExceeded
from schemas.fields import QuadratureRule
from schemas.integrator import IntegratorConfig

TWO_PI = 2.0 * np.pi


def random_points(count, radius, seed=0):
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, TWO_PI, count)
    radii = radius * np.sqrt(rng.uniform(0.0, 1.0, count))
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)


class TestVanDerPolAveraging(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.g = SystemService.autonomous_to_periodic(SystemService.vdp_field())
        cls.system = FloquetService.averaged_terms(cls.g, 2)

    def test_first_order_matches_closed_form(self):
        points = random_points(20, 3.0)
        np.testing.assert_allclose(
            np.asarray(self.system.g_terms[0](points)),
            SystemService.vdp_g1_closed(points),
            atol=1e-8,
        )
        np.testing.assert_allclose(
            np.asarray(self.system.g_terms[0](np.array([2.0, 0.0]))), [0.0, 0.0], atol=1e-12
        )

    def test_second_order_matches_closed_form(self):
        points = random_points(20, 3.0, seed=1)
        np.testing.assert_allclose(
            np.asarray(self.system.g_terms[1](points)),
            SystemService.vdp_g2_closed(points),
            atol=1e-7,
        )
        np.testing.assert_allclose(
            np.asarray(self.system.g_terms[1](np.array([2.0, 0.0]))), [0.0, 0.125], atol=1e-7
        )

    def test_rates_have_zero_mean_and_generators_vanish_at_the_period(self):
        x = np.array([0.7, -1.3])
        for w in self.system.w_terms:
            np.testing.assert_allclose(np.asarray(w(x, 0.0)), [0.0, 0.0], atol=1e-14)
            np.testing.assert_allclose(np.asarray(w(x, TWO_PI)), [0.0, 0.0], atol=1e-10)

    @pytest.mark.slow
    def test_explicit_terms_agree(self):
        recursive = FloquetService.averaged_terms(self.g, 3).g_terms
        explicit = FloquetService.averaged_terms_explicit(self.g)
        self.assertEqual(len(explicit), 3)
        for x in (np.array([1.2, 0.4]), np.array([-0.3, 1.7])):
            for r, direct in zip(recursive, explicit):
                np.testing.assert_allclose(np.asarray(r(x)), np.asarray(direct(x)), atol=1e-7)
        # odd terms are radial on the x1 axis
        g3 = np.asarray(recursive[2](np.array([2.0, 0.0])))
        self.assertLess(abs(float(g3[1])), 1e-7)

    def test_generator_period_check(self):
        self.assertLess(FloquetService.generator_period_check(self.g, 2), 1e-8)

    def test_change_of_variables_is_the_identity_at_stroboscopic_times(self):
        x = np.array([1.0, 0.5])
        for t in (0.0, TWO_PI):
            np.testing.assert_allclose(
                FloquetService.change_of_variables(self.system, x, t, 0.05), x, atol=1e-8
            )

    def test_change_of_variables_moves_points_in_between(self):
        x = np.array([1.0, 0.5])
        moved = FloquetService.change_of_variables(self.system, x, 1.0, 0.1)
        self.assertGreater(np.linalg.norm(moved - x), 1e-4)

    def test_first_order_solution_follows_the_radius_law(self):
        x0 = np.array([1.0, 0.0])
        eps = 0.1
        trajectory = FloquetService.stroboscopic_solve(self.system, x0, 30.0, eps, order=1)
        law = SystemService.vdp_radius_law(1.0, eps, trajectory.times)
        np.testing.assert_allclose(np.sum(trajectory.states**2, axis=-1), law, atol=1e-8)

    def test_second_order_improves_stroboscopic_error(self):
        eps = 0.05
        x0 = np.array([1.0, 0.5])
        t_end = 3 * TWO_PI
        times = FloquetService.stroboscopic_times(TWO_PI, t_end)
        exact = OdeintService.integrate(
            OdeintService.field_rhs(self.g, eps),
            x0,
            0.0,
            t_end,
            IntegratorConfig.with_tolerance(1e-12, dense_output=times),
        )
        errors = []
        for order in (1, 2):
            averaged = FloquetService.stroboscopic_solve(self.system, x0, t_end, eps, order=order)
            np.testing.assert_array_equal(averaged.times, exact.times)
            errors.append(np.linalg.norm(averaged.states - exact.states, axis=-1).max())
        self.assertLess(errors[1], errors[0] / 5.0)

    def test_second_order_stroboscopic_error_is_cubic_in_eps(self):
        x0 = np.array([1.0, 0.5])
        t_end = 3 * TWO_PI
        times = FloquetService.stroboscopic_times(TWO_PI, t_end)
        errors = []
        for eps in (0.05, 0.025):
            exact = OdeintService.integrate(
                OdeintService.field_rhs(self.g, eps),
                x0,
                0.0,
                t_end,
                IntegratorConfig.with_tolerance(1e-12, dense_output=times),
            )
            averaged = FloquetService.stroboscopic_solve(self.system, x0, t_end, eps, order=2)
            errors.append(np.linalg.norm(averaged.states - exact.states, axis=-1).max())
        # halving eps divides an O(eps^3) error by about 8
        self.assertGreater(errors[0] / errors[1], 5.0)

    def test_order_limits(self):
        with self.assertRaises(OrderExceeded):
            FloquetService.averaged_terms(self.g, 4)
        with self.assertRaises(ValueError):
            self.system.weights(0.1, 3)


class TestStroboscopicTimes(unittest.TestCase):
    def test_multiples_of_the_period(self):
        np.testing.assert_allclose(
            FloquetService.stroboscopic_times(TWO_PI, 2 * TWO_PI), [0.0, TWO_PI, 2 * TWO_PI]
        )

    def test_closed_by_the_final_time(self):
        np.testing.assert_allclose(
            FloquetService.stroboscopic_times(2.0, 5.0), [0.0, 2.0, 4.0, 5.0]
        )

    def test_negative_final_time(self):
        with self.assertRaises(ValueError):
            FloquetService.stroboscopic_times(2.0, -1.0)


class TestFloquetLinear(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.a = SystemService.random_trigonometric_matrix(np.random.default_rng(11), 2)
        cls.quad = QuadratureRule.trigonometric()
        cls.result = FloquetService.floquet_linear(cls.a, 3, cls.quad)

    def test_lambda_vanishes_at_zero_and_period(self):
        for term in self.result.lambda_terms:
            np.testing.assert_allclose(term.at(0.0), np.zeros((2, 2)), atol=1e-9)
            np.testing.assert_allclose(term.at(TWO_PI), np.zeros((2, 2)), atol=1e-9)

    def test_constant_terms_are_magnus_terms_over_the_period(self):
        omegas = MagnusLinearService.magnus_terms_prelie(self.a, 3, self.quad).omega_at(TWO_PI)
        for f_k, omega in zip(self.result.f_terms, omegas):
            np.testing.assert_allclose(f_k, omega / TWO_PI, atol=1e-9)

    def test_first_constant_is_the_average(self):
        np.testing.assert_allclose(
            self.result.f_terms[0], self.a.average(TWO_PI, self.quad), atol=1e-14
        )

    def test_propagator_error_scales_with_order(self):
        t = 2.0
        errors = [
            np.linalg.norm(
                FloquetService.floquet_propagator(self.result, t, eps)
                - MagnusLinearService.reference_propagator(self.a, t, eps)
            )
            for eps in (0.05, 0.025)
        ]
        self.assertGreater(errors[0] / errors[1], 8.0)

    def test_requires_a_period(self):
        with self.assertRaises(NotPeriodic):
            FloquetService.floquet_linear(SystemService.linear_ab_matrix(), 2)


if __name__ == "__main__":
    unittest.main()
