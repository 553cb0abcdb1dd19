"""
Quadrature tables on the unit interval [0, 1].

Tables are cached per (kind, nodes, panels) and returned read-only.
"""

from functools import lru_cache
from typing import Tuple

import numpy as np
from numpy.polynomial import legendre

GAUSS_LEGENDRE = "gauss-legendre"
PERIODIC_MIDPOINT = "periodic-midpoint"


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _panel_rule(kind: str, nodes_per_panel: int) -> Tuple[np.ndarray, np.ndarray]:
    if kind == GAUSS_LEGENDRE:
        y, w = legendre.leggauss(nodes_per_panel)
        return (y + 1.0) / 2.0, w / 2.0
    if kind == PERIODIC_MIDPOINT:
        nodes = (np.arange(nodes_per_panel) + 0.5) / nodes_per_panel
        return nodes, np.full(nodes_per_panel, 1.0 / nodes_per_panel)
    raise ValueError(f"Unknown quadrature kind: {kind}")


@lru_cache(maxsize=None)
def unit_rule(kind: str, nodes_per_panel: int, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite nodes and weights on [0, 1]; weights sum to 1."""
    base_nodes, base_weights = _panel_rule(kind, nodes_per_panel)
    nodes = np.concatenate([(p + base_nodes) / panels for p in range(panels)])
    weights = np.tile(base_weights, panels) / panels
    return _readonly(nodes), _readonly(weights)


@lru_cache(maxsize=None)
def cumulative_matrix(nodes_per_panel: int, panels: int) -> np.ndarray:
    """
    Spectral integration matrix Q on the composite Gauss-Legendre nodes s_i.

    (Q @ f)[i] approximates the integral of f over [0, s_i] from the samples
    f(s_j); it is exact for piecewise polynomials of degree < nodes_per_panel.
    """
    y, w = legendre.leggauss(nodes_per_panel)
    lagrange = np.linalg.inv(legendre.legvander(y, nodes_per_panel - 1))
    antiderivatives = legendre.legint(lagrange, lbnd=-1)
    local = 0.5 * legendre.legval(y, antiderivatives).T
    full_panel = 0.5 * w

    size = nodes_per_panel * panels
    matrix = np.zeros((size, size))
    for p in range(panels):
        rows = slice(p * nodes_per_panel, (p + 1) * nodes_per_panel)
        matrix[rows, rows] = local / panels
        for q in range(p):
            cols = slice(q * nodes_per_panel, (q + 1) * nodes_per_panel)
            matrix[rows, cols] = full_panel / panels
    return _readonly(matrix)
