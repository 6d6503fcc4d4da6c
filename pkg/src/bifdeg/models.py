"""Synthetic matrix fields with known degrees, used by tests, demos and calibration.

Every field takes the ambient coordinates of its sphere factors as lists of
:class:`~bifdeg.dual.Dual` (or plain arrays) and returns a nested list of
matrix entries.  Quaternions are written x = x1 + x2 i + x3 j + x4 k.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .dual import exp

__all__ = [
    "su2_matrix",
    "quaternion_left",
    "quaternion_product",
    "quaternion_conj",
    "winding_diag",
    "clifford_join",
    "stereographic",
    "su2_symbol",
    "inverse_stereographic",
    "JoinModel",
    "one_point_model",
    "two_point_model",
]


def su2_matrix(x: Sequence) -> list[list]:
    """Complex 2x2 matrix of a quaternion: [[a, -conj b], [b, conj a]], a = x1 + i x2, b = x3 + i x4."""
    x1, x2, x3, x4 = x
    return [[x1 + 1j * x2, -x3 + 1j * x4], [x3 + 1j * x4, x1 - 1j * x2]]


def quaternion_left(x: Sequence) -> list[list]:
    """Real 4x4 matrix of left multiplication by the quaternion x."""
    a, b, c, d = x
    return [
        [a, -b, -c, -d],
        [b, a, -d, c],
        [c, d, a, -b],
        [d, -c, b, a],
    ]


def quaternion_product(p: Sequence, q: Sequence) -> list:
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return [
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ]


def quaternion_conj(p: Sequence) -> list:
    return [p[0], -p[1], -p[2], -p[3]]


def winding_diag(z, w: int, size: int = 2) -> list[list]:
    """diag(z^w, 1, ..., 1) for a unit complex number z."""
    first = z ** w if w >= 0 else _conj(z) ** (-w)
    return [[first if i == j == 0 else (1.0 if i == j else 0.0) for j in range(size)] for i in range(size)]


def _conj(z):
    return z.conj() if hasattr(z, "conj") else np.conj(z)


def clifford_join(a: list[list], w) -> list[list]:
    """[[w I, -A*], [A, conj(w) I]]; invertible unless w = 0 and A = 0 simultaneously
    when A*A is a positive multiple of the identity."""
    n = len(a)
    wc = _conj(w)
    top = [[w if i == j else 0.0 for j in range(n)] + [-_conj(a[j][i]) for j in range(n)] for i in range(n)]
    bottom = [list(a[i]) + [wc if i == j else 0.0 for j in range(n)] for i in range(n)]
    return top + bottom


def stereographic(y: Sequence) -> list:
    """λ_j = y_j / (1 - y_last): the parameter chart of S^q = R^q ∪ {∞}."""
    d = 1.0 - y[-1]
    return [c / d for c in y[:-1]]


def su2_symbol(y: Sequence, omega: Sequence) -> list[list]:
    """Quotient symbol on S^2 × S^1 whose normalisation is a degree-one map to SU(2).

    With β = exp(-|λ|²): w = β z + 1 - β, a = β (λ1 + i λ2), σ = [[w, -conj a], [a, conj w]].
    """
    lam = stereographic(y)
    r2 = lam[0] * lam[0] + lam[1] * lam[1]
    beta = exp(-r2)
    z = omega[0] + 1j * omega[1]
    w = beta * z + (1.0 - beta)
    a = beta * (lam[0] + 1j * lam[1])
    return [[w, -_conj(a)], [a, _conj(w)]]


def inverse_stereographic(lam: Sequence) -> list:
    """y = (2λ, |λ|² - 1) / (|λ|² + 1) ∈ S^q."""
    r2 = sum(v * v for v in lam)
    d = r2 + 1.0
    return [2.0 * v / d for v in lam] + [(r2 - 1.0) / d]


class JoinModel:
    """Synthetic q = 4, n = 1 symbol with isolated singular parameters.

    ``a(y)`` is a polynomial map S^4 → R^4 (a quaternion) and ``beta(y)`` a
    polynomial weight; the fiber variable z ∈ S^1 enters through
    w = 1 + β(y) (z - 1), which winds once around 0 where β > 1/2.  The
    symbol is the Clifford join of the complexified left multiplication
    L(a) with w (8x8).  The singular parameters are the zeros of ``a`` where
    β > 1/2; they are listed in ``singular_points`` (as λ ∈ R^4).
    """

    def __init__(self, a, beta, singular_points, name: str = ""):
        self.a = a
        self.beta = beta
        self.singular_points = [np.asarray(p, dtype=float) for p in singular_points]
        self.name = name

    def local_field(self, index: int, radius: float = 0.1):
        """Real 4x4 map on S^3 around a singular parameter: x ↦ L(a(y(λ_i + radius x)))."""
        c = self.singular_points[index]

        def field(x):
            return quaternion_left(self.a(inverse_stereographic([c[j] + radius * x[j] for j in range(4)])))

        return field

    def local_fields(self, radius: float = 0.1) -> list:
        return [(p, self.local_field(i, radius)) for i, p in enumerate(self.singular_points)]

    def __call__(self, y, omega):
        z = omega[0] + 1j * omega[1]
        w = 1.0 + self.beta(y) * (z - 1.0)
        return clifford_join(quaternion_left(self.a(y)), w)


def one_point_model() -> JoinModel:
    """a = (y1, y2, y3, y4), β = (1 - y5)/2: a single singular parameter at λ = 0."""
    return JoinModel(
        lambda y: [y[0], y[1], y[2], y[3]],
        lambda y: (1.0 - y[4]) * 0.5,
        [(0.0, 0.0, 0.0, 0.0)],
        "one-point",
    )


def two_point_model(opposite: bool = False) -> JoinModel:
    """Two singular parameters at λ = (±1, 0, 0, 0).

    With v = (y1, y2, y3, y4) read as a quaternion, a = (Im v², y5) and
    β = (1 + Re v²)/2, i.e. the one-point construction pulled back along the
    quaternion square; both local degrees then agree.  With ``opposite``,
    a = (y2, y3, y4, y5) and β = y1², whose local degrees cancel.
    """
    if opposite:
        return JoinModel(
            lambda y: [y[1], y[2], y[3], y[4]],
            lambda y: y[0] * y[0],
            [(1.0, 0.0, 0.0, 0.0), (-1.0, 0.0, 0.0, 0.0)],
            "two-point-opposite",
        )
    return JoinModel(
        lambda y: [2.0 * y[0] * y[1], 2.0 * y[0] * y[2], 2.0 * y[0] * y[3], y[4]],
        lambda y: (1.0 + y[0] * y[0] - y[1] * y[1] - y[2] * y[2] - y[3] * y[3]) * 0.5,
        [(1.0, 0.0, 0.0, 0.0), (-1.0, 0.0, 0.0, 0.0)],
        "two-point",
    )
