"""
Quadrature building blocks.

Gauss-Legendre rules on [-1, 1] come from numpy and are cached per order.
`adaptive_gauss_legendre` bisects panels until the one-panel and two-panel
estimates agree. `power_weights` returns product-integration weights for the
weakly singular factor (S - x)^mu against piecewise-linear data on arbitrary
increasing nodes.
"""

from functools import lru_cache
from typing import Callable, Tuple

import numpy as np

from ..config import Tolerances
from .exceptions import NonConvergent


@lru_cache(maxsize=16)
def gauss_legendre_rule(npts: int) -> Tuple[np.ndarray, np.ndarray]:
    """Return (nodes, weights) of the `npts`-point rule on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(func: Callable, a: float, b: float, npts: int) -> float:
    """Integrate a vectorised `func` over [a, b] with one Gauss-Legendre panel."""
    nodes, weights = gauss_legendre_rule(npts)
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * nodes
    return float(half * np.dot(weights, func(x)))


def adaptive_gauss_legendre(
    func: Callable,
    a: float,
    b: float,
    tol: float = Tolerances.SPECTRAL_QUAD,
    npts: int = Tolerances.GL_POINTS,
    max_depth: int = Tolerances.SPECTRAL_MAX_DEPTH,
) -> Tuple[float, float]:
    """
    Adaptive composite Gauss-Legendre quadrature of `func` over [a, b].

    Returns (value, error_estimate). Panels are split until the difference
    between the panel estimate and the sum over its halves drops below the
    share of `tol` assigned to that panel.
    """
    whole = gauss_legendre(func, a, b, npts)
    stack = [(a, b, whole, tol, 0)]
    total = 0.0
    error = 0.0
    while stack:
        lo, hi, estimate, budget, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = gauss_legendre(func, lo, mid, npts)
        right = gauss_legendre(func, mid, hi, npts)
        delta = abs(left + right - estimate)
        if delta <= budget or delta <= 1e-15 * abs(left + right):
            total += left + right
            error += delta
        elif depth >= max_depth:
            raise NonConvergent(
                f"Adaptive quadrature did not reach {tol:.1e} on [{lo}, {hi}]"
            )
        else:
            stack.append((lo, mid, left, 0.5 * budget, depth + 1))
            stack.append((mid, hi, right, 0.5 * budget, depth + 1))
    return total, error


def power_weights(x: np.ndarray, mu) -> np.ndarray:
    """
    Weights w with sum(w * g) = int_{x[0]}^{x[-1]} (x[-1] - s)^mu g(s) ds exactly
    for g piecewise linear on `x`.

    `mu` is a scalar > -1 or an array with one exponent per cell.
    """
    upper = x[-1]
    weights = np.zeros_like(x, dtype=float)
    if x.size < 2:
        return weights
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (x.size - 1,))
    far = upper - x[:-1]
    near = upper - x[1:]
    width = x[1:] - x[:-1]
    # Zeroth and first moments of (upper - s)^mu on each cell
    moment0 = (far ** (mu + 1.0) - near ** (mu + 1.0)) / (mu + 1.0)
    moment1 = far * moment0 - (far ** (mu + 2.0) - near ** (mu + 2.0)) / (mu + 2.0)
    weights[:-1] += moment0 - moment1 / width
    weights[1:] += moment1 / width
    return weights
