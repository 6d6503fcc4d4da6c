"""Independent oracles for degree computations.

Nothing here touches dual numbers or matrix-valued forms: maps are sampled as
plain arrays and differentiated by central differences.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .quadrature import ProductChart, QuadratureSpec, integrate_top_form

__all__ = ["brouwer_degree", "su2_vector", "sphere_volume"]


def sphere_volume(d: int) -> float:
    """Area of the unit sphere S^d."""
    return 2 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)


def su2_vector(u: np.ndarray) -> np.ndarray:
    """(Re a, Im a, Re b, Im b) of a matrix [[a, -conj b], [b, conj a]], scaled to unit length."""
    a, b = u[..., 0, 0], u[..., 1, 0]
    v = np.stack([a.real, a.imag, b.real, b.imag])
    return v / np.linalg.norm(v, axis=0)


def brouwer_degree(
    vector_map: Callable[[np.ndarray], np.ndarray],
    chart: ProductChart | list,
    spec: QuadratureSpec | None = None,
    step: float = 1e-5,
) -> float:
    """Degree of a map from a d-dimensional product of spheres to S^d.

    ``vector_map`` takes chart angles ``(d, B)`` and returns nonzero vectors
    ``(d + 1, B)``; they are normalised here.  The pulled-back volume density
    det[F, ∂_1 F, …, ∂_d F] is integrated and divided by |S^d|.
    """
    chart = chart if isinstance(chart, ProductChart) else ProductChart(chart)
    d = chart.dim

    def unit(a):
        v = np.asarray(vector_map(a), dtype=float)
        return v / np.linalg.norm(v, axis=0)

    def density(angles):
        f = unit(angles)
        cols = [f]
        for c in range(d):
            e = np.zeros((d, 1))
            e[c] = step
            cols.append((unit(angles + e) - unit(angles - e)) / (2 * step))
        m = np.stack(cols).transpose(2, 1, 0)  # (B, d+1, d+1), columns are F and its partials
        return np.linalg.det(m)

    res = integrate_top_form(chart, density, spec or QuadratureSpec())
    return float(res.value.real) / sphere_volume(d)
