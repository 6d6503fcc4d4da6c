"""Exact integer invariants: prime valuations, the function m(s), J-groups of
spheres, divisibility thresholds n(q) and the bifurcation verdicts built on them.

Everything here is plain ``int`` arithmetic; nothing touches floating point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "JStructure",
    "JGroupDescriptor",
    "VerdictKind",
    "Verdict",
    "UnsupportedDimensionError",
    "is_prime",
    "nu_p",
    "m_function",
    "n_of_q",
    "j_group",
    "c_k",
    "verdict_global",
    "verdict_local",
]


class UnsupportedDimensionError(ValueError):
    """Raised when a parameter dimension q is outside q = 0, 4 mod 8."""


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def _check_positive(name: str, value: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"{name} must be an int, got {type(value).__name__}")
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return value


def nu_p(p: int, s: int) -> int:
    """Exponent of the prime ``p`` in the factorisation of ``s``.

    >>> nu_p(2, 24), nu_p(3, 24), nu_p(5, 7)
    (3, 1, 0)
    """
    if not is_prime(p):
        raise ValueError(f"p={p} is not prime")
    s = _check_positive("s", s)
    e = 0
    while s % p == 0:
        s //= p
        e += 1
    return e


def m_function(s: int) -> int:
    """The number-theoretic function m(s) governing the order of J(S^{2s}).

    The 2-adic exponent is ``2 + nu_2(s)`` for even ``s`` and 1 for odd ``s``;
    an odd prime ``p`` contributes ``1 + nu_p(s)`` when ``(p - 1) | s`` and
    nothing otherwise.  Only primes with ``p - 1 <= s`` can divide ``m(s)``.

    >>> [m_function(s) for s in range(1, 7)]
    [2, 24, 2, 240, 2, 504]
    """
    s = _check_positive("s", s)
    result = 2 ** (2 + nu_p(2, s)) if s % 2 == 0 else 2
    for p in range(3, s + 2, 2):
        if s % (p - 1) == 0 and is_prime(p):
            result *= p ** (1 + nu_p(p, s))
    return result


def n_of_q(q: int) -> int:
    """Divisibility threshold: ``m(q/2)`` for q = 0 mod 8, ``2 m(q/2)`` for q = 4 mod 8."""
    q = _check_positive("q", q)
    if q % 8 == 0:
        return m_function(q // 2)
    if q % 8 == 4:
        return 2 * m_function(q // 2)
    raise UnsupportedDimensionError(f"n(q) is defined only for q = 0, 4 mod 8 (got q={q})")


class JStructure(enum.Enum):
    TRIVIAL = "trivial"
    CYCLIC_ORDER_2 = "cyclic_order_2"
    CYCLIC_ORDER_M = "cyclic_order_m"


@dataclass(frozen=True)
class JGroupDescriptor:
    """Structure of J(S^q); ``order`` is 1, 2 or m(q/2) accordingly."""

    q: int
    structure: JStructure
    order: int

    def __str__(self) -> str:
        if self.structure is JStructure.TRIVIAL:
            return "0"
        return f"Z/{self.order}"


def j_group(q: int) -> JGroupDescriptor:
    """J(S^q): Z/2 for q = 1, 2 mod 8, Z/m(q/2) for q = 4s, trivial otherwise."""
    q = _check_positive("q", q)
    if q % 8 in (1, 2):
        return JGroupDescriptor(q, JStructure.CYCLIC_ORDER_2, 2)
    if q % 4 == 0:
        return JGroupDescriptor(q, JStructure.CYCLIC_ORDER_M, m_function(q // 2))
    return JGroupDescriptor(q, JStructure.TRIVIAL, 1)


_C_TABLE = (1, 2, 4, 4, 8, 8, 8, 8)


def c_k(k: int) -> int:
    """Kernel-dimension divisor from the regularity corollary, 8-periodic in ``k``.

    The table is reproduced as printed, periodicity included.  Note that the
    classical Radon-Hurwitz numbers are *not* periodic (they gain a factor 16
    per shift by 8); the printed periodicity is kept verbatim here.
    """
    k = _check_positive("k", k)
    return _C_TABLE[(k - 1) % 8]


class VerdictKind(enum.Enum):
    BIFURCATION_EXISTS = "BifurcationExists"
    SECOND_BIFURCATION_EXISTS = "SecondBifurcationExists"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    residue: int
    threshold: int
    # residue of d(sigma) in the local case, when a global degree was supplied
    global_residue: Optional[int] = None

    def __post_init__(self):
        if self.kind is not VerdictKind.INCONCLUSIVE and self.residue == 0:
            raise ValueError("a bifurcation verdict requires a nonzero residue")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "residue": self.residue,
            "threshold": self.threshold,
            "global_residue": self.global_residue,
        }


def verdict_global(d_sigma: int, q: int) -> Verdict:
    """Global criterion: a bifurcation point exists when ``n(q)`` does not divide ``d_sigma``."""
    n = n_of_q(q)
    r = int(d_sigma) % n
    kind = VerdictKind.BIFURCATION_EXISTS if r else VerdictKind.INCONCLUSIVE
    return Verdict(kind, r, n)


def verdict_local(d_lambda0: int, d_sigma: Optional[int], q: int) -> Verdict:
    """Local criterion at an isolated singular point.

    ``lambda0`` bifurcates when ``n(q)`` does not divide ``d_lambda0``; if in
    addition ``d_lambda0`` and ``d_sigma`` differ mod ``n(q)`` a second
    bifurcation point must exist.  Pass ``d_sigma=None`` when no global degree
    is known; the second-point test is then skipped.
    """
    n = n_of_q(q)
    r = int(d_lambda0) % n
    g = None if d_sigma is None else int(d_sigma) % n
    if r == 0:
        kind = VerdictKind.INCONCLUSIVE
    elif g is not None and g != r:
        kind = VerdictKind.SECOND_BIFURCATION_EXISTS
    else:
        kind = VerdictKind.BIFURCATION_EXISTS
    return Verdict(kind, r, n, g)
