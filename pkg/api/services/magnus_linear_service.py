"""
Service layer for the Magnus expansion of Y' = eps A(t) Y.
"""

import itertools
import logging
from functools import lru_cache
from math import comb, factorial
from typing import Dict, List, Optional, Tuple

import jax
import jax.numpy as jnp
import numpy as np
from scipy.linalg import expm

from api.services.odeint_service import OdeintService
from core.config import settings
from core.exceptions import OrderExceeded
from core.matrices import MatrixFunction
from core.words import MAX_WORD_ORDER, bernoulli_numbers, magnus_rates
from schemas.fields import QuadratureRule
from schemas.integrator import IntegratorConfig
from schemas.magnus import BernoulliTable, MagnusTerms, summed_matrices

logger = logging.getLogger(__name__)

ORACLE_MAX_ORDER = 4


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _descents(sequence: Tuple[int, ...]) -> int:
    return sum(1 for i in range(len(sequence) - 1) if sequence[i] > sequence[i + 1])


def _signed_weight(n: int, descents: int) -> float:
    return (-1) ** descents / (n * comb(n - 1, descents))


class MagnusLinearService:
    """Service class for the linear Magnus expansion."""

    @staticmethod
    def bernoulli_table(n_max: int) -> BernoulliTable:
        """Exact B_0..B_n_max."""
        return BernoulliTable(values=list(bernoulli_numbers(n_max)))

    @staticmethod
    def _check_order(n: int, limit: int) -> None:
        if not 1 <= n <= limit:
            raise OrderExceeded(f"order {n} outside the supported range 1..{limit}")

    @staticmethod
    def _recursive_values(
        a: MatrixFunction, n: int, t: float, quad: QuadratureRule
    ) -> Tuple[List[np.ndarray], List[np.ndarray], Dict[Tuple[int, int], np.ndarray]]:
        """
        Omega_1..Omega_n(t), R_1..R_n(t) and the S_m^(j)(t) of the Bernoulli
        recursion, with every integral taken by the spectral cumulative rule.
        """
        nodes, weights = quad.unit()
        size = nodes.shape[0]
        grid = np.append(t * nodes, t)
        # rows 0..size-1 integrate to each node, the last row to t
        integrate = t * np.vstack([quad.cumulative(), weights])
        values = a.at(grid)
        coefficients = MagnusLinearService.bernoulli_table(n)

        def antiderivative(rate: np.ndarray) -> np.ndarray:
            return np.einsum("ij,jab->iab", integrate, rate[:size])

        rates = [values]
        omegas = [antiderivative(values)]
        s_terms: Dict[Tuple[int, int], np.ndarray] = {}
        for m in range(2, n + 1):
            s_terms[(m, 1)] = _commutator(omegas[m - 2], values)
            for j in range(2, m):
                s_terms[(m, j)] = sum(
                    _commutator(omegas[k - 1], s_terms[(m - k, j - 1)])
                    for k in range(1, m - j + 1)
                )
            rate = sum(
                float(coefficients.coefficient(j)) * s_terms[(m, j)] for j in range(1, m)
            )
            rates.append(rate)
            omegas.append(antiderivative(rate))

        return (
            [omega[-1] for omega in omegas],
            [rate[-1] for rate in rates],
            {key: value[-1] for key, value in s_terms.items()},
        )

    @staticmethod
    def magnus_terms_recursive(
        a: MatrixFunction, n: int, quad: Optional[QuadratureRule] = None
    ) -> MagnusTerms:
        """Omega_1..Omega_n through the Bernoulli recursion."""
        MagnusLinearService._check_order(n, settings.MAX_MAGNUS_ORDER)
        quad = quad or QuadratureRule()

        @lru_cache(maxsize=256)
        def values_at(t: float):
            return MagnusLinearService._recursive_values(a, n, t, quad)

        def pointwise(index: int, which: int):
            def evaluate(t):
                times = np.asarray(t, dtype=float)
                stacked = [values_at(float(s))[which][index] for s in times.ravel()]
                shape = times.shape + (a.dim, a.dim)
                return jnp.asarray(np.asarray(stacked).reshape(shape))

            return evaluate

        logger.info("Recursive Magnus terms of %s through order %d", a.name, n)
        return MagnusTerms(
            omega=[
                MatrixFunction(pointwise(j, 0), a.dim, traceable=False, name=f"Omega_{j + 1}")
                for j in range(n)
            ],
            rates=[
                MatrixFunction(pointwise(j, 1), a.dim, traceable=False, name=f"R_{j + 1}")
                for j in range(n)
            ],
            route="recursive",
        )

    @staticmethod
    def magnus_terms_prelie(
        a: MatrixFunction, n: int, quad: Optional[QuadratureRule] = None
    ) -> MagnusTerms:
        """Omega_1..Omega_n from the explicit pre-Lie words (n <= 4)."""
        MagnusLinearService._check_order(n, MAX_WORD_ORDER)
        quad = quad or QuadratureRule()
        rates = magnus_rates(a, lambda p, q: p.prelie(q, quad), n)
        logger.info("Pre-Lie Magnus terms of %s through order %d", a.name, n)
        return MagnusTerms(
            omega=[rate.antiderivative(quad) for rate in rates],
            rates=rates,
            route="prelie",
        )

    @staticmethod
    def _simplex_rule(
        n: int, t: float, quad: QuadratureRule
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Tensor rule on {t >= t_1 >= ... >= t_n >= 0} through t_k = t u_1...u_k.

        Returns times of shape (P, n) and weights including the Jacobian.
        """
        nodes, weights = quad.unit()
        u = np.stack([g.ravel() for g in np.meshgrid(*([nodes] * n), indexing="ij")], axis=-1)
        w = np.prod(
            np.stack([g.ravel() for g in np.meshgrid(*([weights] * n), indexing="ij")], axis=-1),
            axis=-1,
        )
        times = t * np.cumprod(u, axis=1)
        jacobian = t * np.prod(times[:, :-1], axis=1)
        return times, w * jacobian

    @staticmethod
    def omega_permutation_oracle(
        a: MatrixFunction, n: int, t: float, quad: Optional[QuadratureRule] = None
    ) -> np.ndarray:
        """Omega_n(t) as a signed sum of simplex integrals over all permutations."""
        MagnusLinearService._check_order(n, ORACLE_MAX_ORDER)
        quad = quad or QuadratureRule.simplex()
        times, weights = MagnusLinearService._simplex_rule(n, t, quad)
        values = a.at(times)
        total = np.zeros((a.dim, a.dim), dtype=values.dtype)
        for sigma in itertools.permutations(range(n)):
            product = values[:, sigma[0]]
            for k in sigma[1:]:
                product = product @ values[:, k]
            total = total + _signed_weight(n, _descents(sigma)) * np.einsum(
                "p,pij->ij", weights, product
            )
        return total

    @staticmethod
    def omega_descent_oracle(
        a: MatrixFunction, n: int, t: float, quad: Optional[QuadratureRule] = None
    ) -> np.ndarray:
        """Omega_n(t) as a signed sum of right-nested commutators ending in A(t_n)."""
        MagnusLinearService._check_order(n, ORACLE_MAX_ORDER)
        quad = quad or QuadratureRule.simplex()
        times, weights = MagnusLinearService._simplex_rule(n, t, quad)
        values = a.at(times)
        total = np.zeros((a.dim, a.dim), dtype=values.dtype)
        for sigma in itertools.permutations(range(n - 1)):
            nested = values[:, n - 1]
            for k in reversed(sigma):
                nested = _commutator(values[:, k], nested)
            total = total + _signed_weight(n, _descents(sigma)) * np.einsum(
                "p,pij->ij", weights, nested
            )
        return total

    @staticmethod
    def propagate_linear(
        a: MatrixFunction,
        n: int,
        t: float,
        eps: float,
        quad: Optional[QuadratureRule] = None,
    ) -> np.ndarray:
        """exp(sum_j eps^j Omega_j(t)) by Pade(13) scaling and squaring."""
        MagnusLinearService._check_order(n, settings.MAX_MAGNUS_ORDER)
        omegas, _, _ = MagnusLinearService._recursive_values(a, n, t, quad or QuadratureRule())
        return expm(summed_matrices(omegas, eps))

    @staticmethod
    def reference_propagator(
        a: MatrixFunction, t: float, eps: float = 1.0, tol: Optional[float] = None
    ) -> np.ndarray:
        """Y(t) of Y' = eps A Y, Y(0) = I, by the reference integrator."""
        d = a.dim
        complex_valued = np.iscomplexobj(a.at(0.0))

        def derivative(s, y):
            if complex_valued:
                matrix = (y[: d * d] + 1j * y[d * d :]).reshape(d, d)
                rate = eps * a(s) @ matrix
                return jnp.concatenate([rate.real.ravel(), rate.imag.ravel()])
            return (eps * a(s) @ y.reshape(d, d)).ravel()

        compiled = jax.jit(derivative) if a.traceable else derivative
        identity = np.eye(d).ravel()
        start = np.concatenate([identity, np.zeros(d * d)]) if complex_valued else identity
        cfg = IntegratorConfig.with_tolerance(tol or settings.REFERENCE_TOL)
        trajectory = OdeintService.integrate(
            lambda s, y: np.asarray(compiled(s, y)), start, 0.0, t, cfg
        )
        final = trajectory.final_state
        if complex_valued:
            return (final[: d * d] + 1j * final[d * d :]).reshape(d, d)
        return final.reshape(d, d)

    @staticmethod
    def s_terms(
        a: MatrixFunction, m: int, j: int, t: float, quad: Optional[QuadratureRule] = None
    ) -> np.ndarray:
        """S_m^(j)(t) of the Bernoulli recursion (m >= 2, 1 <= j < m)."""
        if not 1 <= j < m:
            raise ValueError(f"S_m^(j) needs 1 <= j < m, got m={m}, j={j}")
        MagnusLinearService._check_order(m, settings.MAX_MAGNUS_ORDER)
        _, _, s_terms = MagnusLinearService._recursive_values(a, m, t, quad or QuadratureRule())
        return s_terms[(m, j)]

    @staticmethod
    def dexp_residual(
        a: MatrixFunction,
        n: int,
        t: float,
        eps: float,
        quad: Optional[QuadratureRule] = None,
    ) -> float:
        """|| eps A(t) - sum_k ad_Omega^k Omega' / (k+1)! || for the order-n truncation."""
        MagnusLinearService._check_order(n, settings.MAX_MAGNUS_ORDER)
        omegas, rates, _ = MagnusLinearService._recursive_values(
            a, n, t, quad or QuadratureRule()
        )
        omega = summed_matrices(omegas, eps)
        term = summed_matrices(rates, eps)
        total = np.zeros_like(term)
        for k in range(n + 2):
            total = total + term / factorial(k + 1)
            term = _commutator(omega, term)
        return float(np.linalg.norm(eps * a.at(t) - total))
