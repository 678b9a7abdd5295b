"""Numerical quadrature on the reference triangle (0,0)-(1,0)-(0,1)."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Points (reference coordinates) and weights; weights sum to the reference area 1/2."""

    points: np.ndarray   # (nq, 2)
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def n(self):
        return len(self.weights)


def _orbit3(a, b):
    # barycentric orbit (a,b,b) -> reference coords (l2, l3)
    return [(b, b), (a, b), (b, a)]


def _orbit6(a, b, c):
    return [(b, c), (c, b), (a, c), (c, a), (a, b), (b, a)]


def default_rule():
    """12-point rule, exact for polynomials of total degree <= 6.

    Positive weights, so coefficient-weighted mass/stiffness forms stay
    positive semidefinite for nonnegative coefficients.
    """
    pts = []
    wts = []
    for (a, b, w) in [
        (0.501426509658179, 0.249286745170910, 0.116786275726379),
        (0.873821971016996, 0.063089014491502, 0.050844906370207),
    ]:
        pts += _orbit3(a, b)
        wts += [w] * 3
    a, b, c = 0.053145049844816, 0.310352451033785, 0.636502499121399
    pts += _orbit6(a, b, c)
    wts += [0.082851075618374] * 6
    points = np.array(pts, dtype=float)
    weights = 0.5 * np.array(wts, dtype=float)  # normalize to reference area
    return QuadratureRule(points=points, weights=weights, degree=6)


def monomial_integral(p, q):
    """Exact integral of x^p y^q over the reference triangle."""
    from math import factorial

    return factorial(p) * factorial(q) / factorial(p + q + 2)
