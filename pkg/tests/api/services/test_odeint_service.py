import unittest

import jax.numpy as jnp
import numpy as np

from api.services.odeint_service import ERROR_WEIGHTS, TABLEAU, WEIGHTS, OdeintService
from core.exceptions import (
    DimensionMismatch,
    IntegratorFailure,
    MaxStepsExceeded,
    NonFiniteState,
)
from core.fields import FieldHandle
from schemas.integrator import IntegratorConfig


def decay(t, y):
    return -y


def oscillator(t, y):
    return np.array([y[1], -y[0]])


class TestTableau(unittest.TestCase):
    def test_rows_are_consistent(self):
        nodes = [sum(row) for row in TABLEAU]
        np.testing.assert_allclose(nodes, [0.0, 0.2, 0.3, 0.8, 8 / 9, 1.0, 1.0], atol=1e-15)
        self.assertAlmostEqual(float(np.sum(WEIGHTS)), 1.0, places=15)
        self.assertAlmostEqual(float(np.sum(ERROR_WEIGHTS)), 0.0, places=15)


class TestIntegrate(unittest.TestCase):
    def test_exponential_decay(self):
        trajectory = OdeintService.integrate(decay, [1.0], 0.0, 1.0)
        self.assertAlmostEqual(float(trajectory.final_state[0]), np.exp(-1.0), delta=1e-8)
        self.assertEqual(trajectory.times[-1], 1.0)
        self.assertGreater(trajectory.meta.steps, 0)
        self.assertGreater(trajectory.meta.evaluations, 6 * trajectory.meta.steps)

    def test_dense_output_lands_on_requested_times(self):
        requested = [0.5, 0.0, 1.25, 3.0, 7.0]
        cfg = IntegratorConfig.with_tolerance(1e-11, dense_output=requested)
        trajectory = OdeintService.integrate(oscillator, [1.0, 0.0], 0.0, 3.0, cfg)
        np.testing.assert_array_equal(trajectory.times, [0.0, 0.5, 1.25, 3.0])
        np.testing.assert_allclose(
            trajectory.states[:, 0], np.cos(trajectory.times), atol=1e-9
        )

    def test_fixed_steps(self):
        cfg = IntegratorConfig(fixed_steps=20)
        trajectory = OdeintService.integrate(decay, [1.0], 0.0, 1.0, cfg)
        self.assertEqual(len(trajectory.times), 21)
        self.assertEqual(trajectory.times[-1], 1.0)
        self.assertAlmostEqual(float(trajectory.final_state[0]), np.exp(-1.0), delta=1e-7)

    def test_fixed_steps_land_on_requested_times(self):
        cfg = IntegratorConfig(fixed_steps=4, dense_output=[0.3])
        trajectory = OdeintService.integrate(lambda t, y: y, [1.0], 0.0, 1.0, cfg)
        np.testing.assert_array_equal(trajectory.times, [0.3])
        self.assertAlmostEqual(float(trajectory.states[0, 0]), np.exp(0.3), delta=1e-5)
        self.assertEqual(trajectory.meta.steps, 5)

    def test_fixed_steps_converge_at_fifth_order(self):
        errors = []
        for n in (16, 32):
            trajectory = OdeintService.integrate(
                decay, [1.0], 0.0, 2.0, IntegratorConfig(fixed_steps=n)
            )
            errors.append(abs(float(trajectory.final_state[0]) - np.exp(-2.0)))
        self.assertGreater(errors[0] / errors[1], 25.0)
        self.assertLess(errors[0] / errors[1], 40.0)

    def test_repeated_runs_are_bitwise_identical(self):
        cfg = IntegratorConfig.with_tolerance(1e-10, dense_output=[0.7, 2.2])
        first = OdeintService.integrate(oscillator, [1.0, 0.3], 0.0, 3.0, cfg)
        second = OdeintService.integrate(oscillator, [1.0, 0.3], 0.0, 3.0, cfg)
        np.testing.assert_array_equal(first.times, second.times)
        np.testing.assert_array_equal(first.states, second.states)
        self.assertEqual(first.meta.steps, second.meta.steps)

    def test_field_handles_are_accepted(self):
        field = FieldHandle(lambda x, t: -x, 2, autonomous=True, name="decay")
        trajectory = OdeintService.integrate(field, [1.0, 2.0], 0.0, 0.5)
        np.testing.assert_allclose(trajectory.final_state, np.exp(-0.5) * np.array([1.0, 2.0]), atol=1e-8)

    def test_scaled_field_rhs(self):
        field = FieldHandle(lambda x, t: jnp.cos(t)[..., None] * x, 1, name="cos")
        rhs = OdeintService.field_rhs(field, eps=0.5)
        np.testing.assert_allclose(rhs(0.0, np.array([2.0])), [1.0])
        frozen = OdeintService.field_rhs(field, eps=1.0, frozen_time=np.pi)
        np.testing.assert_allclose(frozen(0.0, np.array([2.0])), [-2.0])

    def test_empty_interval(self):
        trajectory = OdeintService.integrate(decay, [3.0], 1.0, 1.0)
        self.assertEqual(len(trajectory.times), 1)
        self.assertEqual(trajectory.final_state[0], 3.0)

    def test_hermite_sampling(self):
        trajectory = OdeintService.integrate(lambda t, y: np.array([2.0 * t]), [0.0], 0.0, 2.0)
        samples = trajectory.sample([0.3, 1.1, 1.9])
        np.testing.assert_allclose(samples[:, 0], [0.09, 1.21, 3.61], atol=1e-10)
        with self.assertRaises(ValueError):
            trajectory.sample([2.5])

    def test_state_at(self):
        cfg = IntegratorConfig(dense_output=[0.5])
        trajectory = OdeintService.integrate(decay, [1.0], 0.0, 1.0, cfg)
        self.assertAlmostEqual(float(trajectory.state_at(0.5)[0]), np.exp(-0.5), delta=1e-8)
        with self.assertRaises(KeyError):
            trajectory.state_at(0.25)


class TestIntegrateErrors(unittest.TestCase):
    def test_backwards_interval(self):
        with self.assertRaises(ValueError):
            OdeintService.integrate(decay, [1.0], 1.0, 0.0)

    def test_non_finite_initial_state(self):
        with self.assertRaises(NonFiniteState):
            OdeintService.integrate(decay, [np.nan], 0.0, 1.0)

    def test_matrix_initial_state(self):
        with self.assertRaises(DimensionMismatch):
            OdeintService.integrate(decay, np.eye(2), 0.0, 1.0)

    def test_step_budget(self):
        cfg = IntegratorConfig(max_steps=3)
        with self.assertRaises(MaxStepsExceeded):
            OdeintService.integrate(oscillator, [1.0, 0.0], 0.0, 100.0, cfg)

    def test_blow_up(self):
        def blows_up(t, y):
            return np.array([np.nan]) if t > 0.5 else np.array([1.0])

        with self.assertRaises(IntegratorFailure):
            OdeintService.integrate(blows_up, [0.0], 0.0, 1.0)


if __name__ == "__main__":
    unittest.main()
