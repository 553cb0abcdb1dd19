"""
Service layer for the worked systems: Van der Pol in the rotating frame and
the spectral cubic-type NLS on a torus.
"""

import logging
from typing import Callable, Dict, Tuple

import jax.numpy as jnp
import numpy as np

from core.exceptions import ConfigInvalid, FramePeriodicityViolation
from core.fields import FieldHandle
from core.matrices import MatrixFunction
from schemas.systems import MAX_NLS_MODES, RotatingFrameSystem, SpectralNLSConfig

logger = logging.getLogger(__name__)

FrameAction = Callable[[jnp.ndarray, jnp.ndarray], jnp.ndarray]

FRAME_TOL = 1e-10

# k(r) and K(r) = integral of k from 0 to r
NONLINEARITIES: Dict[str, Tuple[Callable, Callable]] = {
    "cubic": (lambda r: r, lambda r: 0.5 * r**2),
    "quintic": (lambda r: r**2, lambda r: r**3 / 3.0),
    "saturable": (lambda r: r / (1.0 + r), lambda r: r - jnp.log1p(r)),
}


def _rotate_pairs(x: jnp.ndarray, angle: jnp.ndarray) -> jnp.ndarray:
    """Rotate each (x_2l, x_2l+1) pair by [[cos, sin], [-sin, cos]]."""
    re, im = x[..., 0::2], x[..., 1::2]
    c, s = jnp.cos(angle), jnp.sin(angle)
    return jnp.stack([c * re + s * im, -s * re + c * im], axis=-1).reshape(x.shape)


class SystemService:
    """Service class for the worked systems."""

    @staticmethod
    def frame_action(system: RotatingFrameSystem) -> FrameAction:
        """(t, x) -> exp(tA) x, from the closed form if present, else from eig(A)."""
        if system.frame is not None:
            return system.frame
        values, vectors = np.linalg.eig(system.a_matrix)
        vectors_j = jnp.asarray(vectors)
        inverse_j = jnp.asarray(np.linalg.inv(vectors))
        values_j = jnp.asarray(values)

        def action(t, x):
            modal = (x @ inverse_j.T) * jnp.exp(t[..., None] * values_j)
            return jnp.real(modal @ vectors_j.T)

        return action

    @staticmethod
    def frame_periodicity_error(system: RotatingFrameSystem) -> float:
        """max |exp(TA) - I|."""
        action = SystemService.frame_action(system)
        identity = jnp.eye(system.dim)
        period = jnp.full((system.dim,), system.period)
        return float(jnp.max(jnp.abs(action(period, identity) - identity)))

    @staticmethod
    def autonomous_to_periodic(system: RotatingFrameSystem) -> FieldHandle:
        """g(x, t) = exp(-tA) h(exp(tA) x), T-periodic in t."""
        error = SystemService.frame_periodicity_error(system)
        if error > FRAME_TOL:
            raise FramePeriodicityViolation(
                f"exp(TA) differs from the identity by {error:.3e} for {system.name}"
            )
        action = SystemService.frame_action(system)
        h = system.h

        def evaluate(x, t):
            return action(-t, h(action(t, x), t))

        return FieldHandle(
            evaluate,
            system.dim,
            period=system.period,
            jet_capacity=h.jet_capacity,
            traceable=h.traceable,
            name=f"g_{system.name}",
        )

    @staticmethod
    def linear_ab_matrix() -> MatrixFunction:
        """A(t) = alpha + t beta with alpha = [[0, 1], [0, 0]], beta = [[0, 0], [1, 0]]."""
        alpha = np.array([[0.0, 1.0], [0.0, 0.0]])
        beta = np.array([[0.0, 0.0], [1.0, 0.0]])
        return MatrixFunction.polynomial([alpha, beta], name="alpha+t*beta")

    @staticmethod
    def random_polynomial_matrix(
        rng: np.random.Generator, dim: int, degree: int = 3, scale: float = 0.5
    ) -> MatrixFunction:
        """Seeded A(t) = sum_k C_k t^k with normal entries times `scale`."""
        coefficients = scale * rng.standard_normal((degree + 1, dim, dim))
        return MatrixFunction.polynomial(coefficients, name=f"random{dim}x{dim}")

    @staticmethod
    def random_trigonometric_matrix(
        rng: np.random.Generator,
        dim: int,
        harmonics: int = 2,
        scale: float = 0.5,
        period: float = 2.0 * np.pi,
    ) -> MatrixFunction:
        """Seeded T-periodic A(t) with `harmonics` Fourier modes."""
        mean = scale * rng.standard_normal((dim, dim))
        cosines = scale * rng.standard_normal((harmonics, dim, dim))
        sines = scale * rng.standard_normal((harmonics, dim, dim))
        return MatrixFunction.trigonometric(
            mean, cosines, sines, period, name=f"periodic{dim}x{dim}"
        )

    @staticmethod
    def vdp_field() -> RotatingFrameSystem:
        """x'' + x = eps (1 - x^2) x' as u' = A u + eps h(u)."""

        def nonlinearity(u, t):
            return jnp.stack(
                [jnp.zeros_like(u[..., 0]), (1.0 - u[..., 0] ** 2) * u[..., 1]], axis=-1
            )

        def rotation(t, x):
            c, s = jnp.cos(t), jnp.sin(t)
            return jnp.stack(
                [c * x[..., 0] + s * x[..., 1], -s * x[..., 0] + c * x[..., 1]], axis=-1
            )

        return RotatingFrameSystem(
            a_matrix=np.array([[0.0, 1.0], [-1.0, 0.0]]),
            h=FieldHandle(nonlinearity, 2, autonomous=True, name="h_vdp"),
            period=2.0 * np.pi,
            frame=rotation,
            name="vdp",
        )

    @staticmethod
    def vdp_factored_field() -> FieldHandle:
        """eps-free rotating-frame field xi_t(x) V_t."""

        def evaluate(x, t):
            c, s = jnp.cos(t), jnp.sin(t)
            xi = (1.0 - (c * x[..., 0] + s * x[..., 1]) ** 2) * (
                -s * x[..., 0] + c * x[..., 1]
            )
            return jnp.stack([-s * xi, c * xi], axis=-1)

        return FieldHandle(evaluate, 2, period=2.0 * np.pi, name="g_vdp")

    @staticmethod
    def vdp_g1_closed(x) -> np.ndarray:
        """G_1(X) = -((|X|^2 - 4) / 8) X."""
        x = np.asarray(x, dtype=float)
        return -((np.sum(x**2, axis=-1, keepdims=True) - 4.0) / 8.0) * x

    @staticmethod
    def vdp_g2_closed(x) -> np.ndarray:
        """Second-order averaged Van der Pol field, componentwise polynomial form."""
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        first = -(x2 / 256.0) * (
            32.0 - 24.0 * x2**2 + 5.0 * x2**4 - 88.0 * x1**2 + 21.0 * x1**4
            + 10.0 * x1**2 * x2**2
        )
        second = (x1 / 256.0) * (
            21.0 * x1**4 + 32.0 - 88.0 * x1**2 + 40.0 * x2**2 + 10.0 * x1**2 * x2**2
            + 5.0 * x2**4
        )
        return np.stack([first, second], axis=-1)

    @staticmethod
    def vdp_limit_cycle_invariant(x, eps: float):
        """|X|^2 - 4 - (eps / 2) X_1 X_2^3, vanishing on the refined cycle."""
        x = np.asarray(x, dtype=float)
        return np.sum(x**2, axis=-1) - 4.0 - 0.5 * eps * x[..., 0] * x[..., 1] ** 3

    @staticmethod
    def vdp_radius_law(n0: float, eps: float, t):
        """N(t) solving N' = -eps N (N - 4) / 4, N(0) = n0."""
        t = np.asarray(t, dtype=float)
        return 4.0 * n0 / (n0 + (4.0 - n0) * np.exp(-eps * t))

    @staticmethod
    def validate_nls(cfg: SpectralNLSConfig) -> SpectralNLSConfig:
        if not 1 <= cfg.modes <= MAX_NLS_MODES:
            raise ConfigInvalid(f"mode cutoff must lie in 1..{MAX_NLS_MODES}, got {cfg.modes}")
        if not cfg.length > 0:
            raise ConfigInvalid(f"torus length must be positive, got {cfg.length}")
        if cfg.grid_points is not None and cfg.grid_points < 4 * cfg.modes + 1:
            raise ConfigInvalid(
                f"collocation grid needs at least {4 * cfg.modes + 1} points, got {cfg.grid_points}"
            )
        if not np.isfinite(cfg.strength):
            raise ConfigInvalid("nonlinearity strength must be finite")
        return cfg

    @staticmethod
    def _collocation(cfg: SpectralNLSConfig) -> jnp.ndarray:
        """E[j, l] = exp(i l (2 pi / a) z_j) on the equispaced grid."""
        size = cfg.grid_size
        z = cfg.length * np.arange(size) / size
        return jnp.asarray(
            np.exp(1j * np.outer(z, cfg.wavenumbers()) * 2.0 * np.pi / cfg.length)
        )

    @staticmethod
    def _complex(x: jnp.ndarray) -> jnp.ndarray:
        return x[..., 0::2] + 1j * x[..., 1::2]

    @staticmethod
    def nls_spectral_field(cfg: SpectralNLSConfig) -> RotatingFrameSystem:
        """Spectral truncation as u' = A u + eps h(u) with a block-rotation frame."""
        cfg = SystemService.validate_nls(cfg)
        k, _ = NONLINEARITIES[cfg.nonlinearity]
        basis = SystemService._collocation(cfg)
        size = cfg.grid_size
        kappa = cfg.frequencies()
        kappa_j = jnp.asarray(kappa)

        def nonlinearity(u, t):
            psi = SystemService._complex(u) @ basis.T
            projected = (cfg.strength * k(psi.real**2 + psi.imag**2) * psi) @ jnp.conj(basis) / size
            # -i n in (real, imaginary) pairs
            return jnp.stack([projected.imag, -projected.real], axis=-1).reshape(u.shape)

        def rotation(t, x):
            return _rotate_pairs(x, t[..., None] * kappa_j)

        a_matrix = np.zeros((cfg.dim, cfg.dim))
        for index, value in enumerate(kappa):
            a_matrix[2 * index, 2 * index + 1] = value
            a_matrix[2 * index + 1, 2 * index] = -value

        logger.info(
            "Spectral NLS with M=%d, %d collocation points, T=%g",
            cfg.modes,
            size,
            cfg.period,
        )
        return RotatingFrameSystem(
            a_matrix=a_matrix,
            h=FieldHandle(nonlinearity, cfg.dim, autonomous=True, name=f"h_{cfg.nonlinearity}"),
            period=cfg.period,
            frame=rotation,
            name="nls1d",
        )

    @staticmethod
    def nls_hamiltonian(cfg: SpectralNLSConfig, x, t: float = 0.0):
        """H(x, t) = 1/2 * (a / n) * sum_j strength K(|psi_j|^2) in rotating coordinates."""
        cfg = SystemService.validate_nls(cfg)
        _, big_k = NONLINEARITIES[cfg.nonlinearity]
        physical = _rotate_pairs(
            jnp.asarray(x, dtype=jnp.float64),
            jnp.asarray(t, dtype=jnp.float64) * jnp.asarray(cfg.frequencies()),
        )
        psi = SystemService._complex(physical) @ SystemService._collocation(cfg).T
        density = psi.real**2 + psi.imag**2
        return np.asarray(
            0.5 * cfg.length / cfg.grid_size * jnp.sum(cfg.strength * big_k(density), axis=-1)
        )

    @staticmethod
    def nls_symplectic_matrix(cfg: SpectralNLSConfig) -> np.ndarray:
        """J with g = J^-1 grad H: a * blockdiag([[0, -1], [1, 0]])."""
        cfg = SystemService.validate_nls(cfg)
        block = np.array([[0.0, -1.0], [1.0, 0.0]])
        return cfg.length * np.kron(np.eye(2 * cfg.modes + 1), block)

    @staticmethod
    def nls_mass(x) -> float:
        """sum_l |x_l|^2, invariant under the frame and the flow."""
        x = np.asarray(x, dtype=float)
        return np.sum(x**2, axis=-1)

    @staticmethod
    def nls_physical_state(cfg: SpectralNLSConfig, x, t: float) -> np.ndarray:
        """Fourier coefficients c_l = exp(-i kappa_l t) x_l, l = -M..M."""
        x = np.asarray(x, dtype=float)
        return np.exp(-1j * cfg.frequencies() * t) * (x[..., 0::2] + 1j * x[..., 1::2])
