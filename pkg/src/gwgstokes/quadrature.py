"""Quadrature rules on the reference triangle and the unit interval.

Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre and
Gauss-Jacobi points, which gives exact integration to any requested order
without tabulated point sets.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_ORDER = 20


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on a reference entity.

    For triangles ``points`` has shape ``(nq, 2)`` in reference coordinates
    on ``{x >= 0, y >= 0, x + y <= 1}`` and the weights sum to 1/2.  For
    edges ``points`` has shape ``(nq,)`` on ``[0, 1]`` and the weights sum
    to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def barycentric(self):
        if self.points.ndim != 2:
            raise ValueError("barycentric coordinates only exist for triangle rules")
        x, y = self.points.T
        return np.column_stack([1.0 - x - y, x, y])

    def __len__(self):
        return len(self.weights)


def _check_order(order):
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_ORDER:
        raise ValueError(f"quadrature order must be an integer in [1, {MAX_ORDER}], got {order!r}")


@lru_cache(maxsize=None)
def triangle_rule(order):
    """Rule exact for polynomials of total degree ``order`` on the reference triangle."""
    _check_order(order)
    npts = (order + 2) // 2
    u, wu = roots_legendre(npts)
    # weight (1 - v) absorbs the Jacobian of the collapse
    v, wv = roots_jacobi(npts, 1.0, 0.0)
    U, V = np.meshgrid(u, v, indexing="ij")
    x = 0.25 * (1.0 + U) * (1.0 - V)
    y = 0.5 * (1.0 + V)
    w = np.outer(wu, wv) / 8.0
    pts = np.column_stack([x.ravel(), y.ravel()])
    pts.setflags(write=False)
    w = w.ravel()
    w.setflags(write=False)
    return QuadratureRule(pts, w, order)


@lru_cache(maxsize=None)
def edge_rule(order):
    """Gauss-Legendre rule on ``[0, 1]`` exact for degree ``order``."""
    _check_order(order)
    npts = (order + 2) // 2
    t, w = roots_legendre(npts)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(t, w, order)
