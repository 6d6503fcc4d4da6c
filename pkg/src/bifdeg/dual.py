"""Vectorised forward-mode dual numbers over complex arrays.

A :class:`Dual` carries a value array of shape ``S`` and a stack of partial
derivatives of shape ``(k, *S)``.  All seeded variables are real coordinates,
so derivatives of holomorphic primitives follow the complex chain rule and
``abs2`` (``z * conj(z)``) is differentiated as ``conj(z) dz + z conj(dz)``.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

__all__ = [
    "Dual",
    "EvaluationError",
    "seed",
    "lift",
    "exp",
    "sin",
    "cos",
    "sqrt",
    "atan2",
    "abs2",
    "value_of",
]


class EvaluationError(ArithmeticError):
    """Division by zero, derivative singularity or a non-finite result."""


Scalar = Union[int, float, complex, np.ndarray]


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=complex)


class Dual:
    __slots__ = ("value", "partials")
    __array_priority__ = 1000  # keep ndarray.__mul__ from broadcasting over us

    def __init__(self, value, partials):
        self.value = _as_array(value)
        self.partials = _as_array(partials)

    @property
    def nvars(self) -> int:
        return self.partials.shape[0]

    def __repr__(self) -> str:
        return f"Dual(value={self.value!r}, partials={self.partials!r})"

    def __getitem__(self, idx) -> "Dual":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.value[idx], self.partials[(slice(None),) + idx])

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.partials + other.partials)
        return Dual(self.value + other, self.partials)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.value, -self.partials)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.partials - other.partials)
        return Dual(self.value - other, self.partials)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.partials)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.partials * other.value + self.value * other.partials,
            )
        other = _as_array(other)
        return Dual(self.value * other, self.partials * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            _check_nonzero(other.value)
            inv = 1.0 / other.value
            v = self.value * inv
            return Dual(v, (self.partials - v * other.partials) * inv)
        other = _as_array(other)
        _check_nonzero(other)
        return Dual(self.value / other, self.partials / other)

    def __rtruediv__(self, other):
        _check_nonzero(self.value)
        inv = 1.0 / self.value
        v = _as_array(other) * inv
        return Dual(v, -v * inv * self.partials)

    def __pow__(self, n):
        if isinstance(n, (bool, Dual)) or int(n) != n:
            raise TypeError("Dual supports integer exponents only")
        n = int(n)
        if n == 0:
            return Dual(np.ones_like(self.value), np.zeros_like(self.partials))
        if n < 0:
            _check_nonzero(self.value)
            return 1.0 / (self ** (-n))
        v = self.value ** n
        return Dual(v, n * self.value ** (n - 1) * self.partials)

    def conj(self) -> "Dual":
        return Dual(np.conj(self.value), np.conj(self.partials))


def _check_nonzero(a: np.ndarray) -> None:
    if np.any(a == 0):
        raise EvaluationError("division by zero")


def seed(values: Sequence[Scalar], partials: np.ndarray | None = None) -> list[Dual]:
    """Independent variables.

    With ``partials=None`` each input gets a unit tangent (identity seed);
    otherwise ``partials[j]`` (shape ``(k, *S)``) is the tangent of input ``j``.
    """
    k = len(values)
    out = []
    for j, v in enumerate(values):
        v = _as_array(v)
        if partials is None:
            p = np.zeros((k,) + v.shape, dtype=complex)
            p[j] = 1.0
        else:
            p = _as_array(partials[j])
        out.append(Dual(v, p))
    return out


def lift(x, nvars: int) -> Dual:
    """Promote a constant (or pass a Dual through)."""
    if isinstance(x, Dual):
        return x
    v = _as_array(x)
    return Dual(v, np.zeros((nvars,) + v.shape, dtype=complex))


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Dual) else _as_array(x)


def exp(x):
    if isinstance(x, Dual):
        v = np.exp(x.value)
        return Dual(v, v * x.partials)
    return np.exp(_as_array(x))


def sin(x):
    if isinstance(x, Dual):
        return Dual(np.sin(x.value), np.cos(x.value) * x.partials)
    return np.sin(_as_array(x))


def cos(x):
    if isinstance(x, Dual):
        return Dual(np.cos(x.value), -np.sin(x.value) * x.partials)
    return np.cos(_as_array(x))


def sqrt(x):
    if isinstance(x, Dual):
        v = np.sqrt(x.value)
        if np.any((v == 0) & np.any(x.partials != 0, axis=0)):
            raise EvaluationError("sqrt of zero with an active derivative")
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(v == 0, 0.0, 0.5 / np.where(v == 0, 1.0, v))
        return Dual(v, d * x.partials)
    return np.sqrt(_as_array(x))


def atan2(y, x):
    """Real two-argument arctangent; imaginary parts of the inputs are ignored."""
    yv, xv = value_of(y).real, value_of(x).real
    v = np.arctan2(yv, xv).astype(complex)
    if not isinstance(x, Dual) and not isinstance(y, Dual):
        return v
    r2 = xv * xv + yv * yv
    if np.any(r2 == 0):
        raise EvaluationError("atan2(0, 0) has no derivative")
    k = (x if isinstance(x, Dual) else y).nvars
    dx = lift(x, k).partials.real
    dy = lift(y, k).partials.real
    return Dual(v, (xv * dy - yv * dx) / r2)


def abs2(x):
    if isinstance(x, Dual):
        c = np.conj(x.value)
        return Dual(x.value * c, c * x.partials + x.value * np.conj(x.partials))
    x = _as_array(x)
    return x * np.conj(x)
