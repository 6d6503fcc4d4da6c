"""Small dense complex matrices and matrix-valued one-forms.

All routines are batched: a :class:`MatrixOneForm` holds ``base`` of shape
``(..., m, m)`` and ``components`` of shape ``(d, ..., m, m)``, one partial
derivative per chart coordinate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .dual import Dual

__all__ = [
    "MatrixOneForm",
    "SingularMatrixError",
    "COND_WARN",
    "from_entries",
    "identity_form",
    "matmul",
    "inverse",
    "maurer_cartan",
    "top_trace_coefficient",
    "naive_top_trace",
]

LOG = logging.getLogger(__name__)

COND_WARN = 1e8
MAX_FORM_DEGREE = 7


class SingularMatrixError(np.linalg.LinAlgError):
    """A matrix that must be invertible is (numerically) singular."""


@dataclass
class MatrixOneForm:
    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=complex)
        self.components = np.asarray(self.components, dtype=complex)
        if self.components.shape[1:] != self.base.shape:
            raise ValueError(
                f"components shape {self.components.shape} does not match base {self.base.shape}"
            )

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    @property
    def size(self) -> int:
        return self.base.shape[-1]

    def __getitem__(self, idx) -> "MatrixOneForm":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return MatrixOneForm(self.base[idx], self.components[(slice(None),) + idx])

    def __matmul__(self, other: "MatrixOneForm") -> "MatrixOneForm":
        return matmul(self, other)


def from_entries(entries, nvars: int, shape=None) -> MatrixOneForm:
    """Assemble a form from a nested list of :class:`Dual` or constants."""
    rows = len(entries)
    cols = len(entries[0])
    if shape is None:
        shape = np.broadcast_shapes(
            *(np.shape(e.value if isinstance(e, Dual) else e) for row in entries for e in row)
        )
    base = np.zeros(tuple(shape) + (rows, cols), dtype=complex)
    comps = np.zeros((nvars,) + tuple(shape) + (rows, cols), dtype=complex)
    for i, row in enumerate(entries):
        if len(row) != cols:
            raise ValueError("ragged matrix")
        for j, e in enumerate(row):
            if isinstance(e, Dual):
                base[..., i, j] = e.value
                part = np.asarray(e.partials)
                comps[..., i, j] = part.reshape(part.shape + (1,) * (len(shape) + 1 - part.ndim))
            else:
                base[..., i, j] = e
    return MatrixOneForm(base, comps)


def identity_form(m: int, nvars: int, shape=()) -> MatrixOneForm:
    base = np.broadcast_to(np.eye(m, dtype=complex), tuple(shape) + (m, m)).copy()
    return MatrixOneForm(base, np.zeros((nvars,) + base.shape, dtype=complex))


def matmul(a: MatrixOneForm, b: MatrixOneForm) -> MatrixOneForm:
    """Product rule: d(AB) = dA B + A dB."""
    return MatrixOneForm(a.base @ b.base, a.components @ b.base + a.base @ b.components)


def _checked_inverse(a: np.ndarray) -> np.ndarray:
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("singular matrix in batch") from exc
    norm_a = np.abs(a).sum(axis=-2).max(axis=-1)
    norm_i = np.abs(inv).sum(axis=-2).max(axis=-1)
    cond = norm_a * norm_i
    if not np.all(np.isfinite(cond)):
        raise SingularMatrixError("singular matrix in batch")
    worst = float(np.max(cond)) if cond.size else 1.0
    if worst > 1e14:
        raise SingularMatrixError(f"matrix numerically singular (1-norm condition {worst:.3g})")
    if worst > COND_WARN:
        LOG.warning("ill-conditioned matrix (1-norm condition %.3g): near ellipticity failure", worst)
    return inv


def inverse(a: MatrixOneForm) -> MatrixOneForm:
    """d(A^-1) = -A^-1 dA A^-1."""
    inv = _checked_inverse(a.base)
    return MatrixOneForm(inv, -(inv @ a.components @ inv))


def maurer_cartan(f: MatrixOneForm) -> MatrixOneForm:
    """Replace each component dA/dθ_c by A^-1 dA/dθ_c; the base is kept."""
    inv = _checked_inverse(f.base)
    return MatrixOneForm(f.base, inv @ f.components)


def top_trace_coefficient(omega: MatrixOneForm, d: int | None = None) -> np.ndarray:
    """Coefficient of dθ_1 ∧ … ∧ dθ_d in tr(ω^d).

    This is the alternating sum over permutations π of
    ``sgn(π) tr(M_π(1) … M_π(d))``.  Instead of enumerating the d! orderings,
    partial products are memoised per subset: for a subset S,

        P(S) = Σ_{c ∈ S} (-1)^{#{s ∈ S : s < c}} M_c P(S \\ {c}),

    so level |S| only needs level |S|-1 and the work is d·2^(d-1) matrix
    products rather than d·d!.  For odd d, cyclic invariance of the trace
    pins the first factor, leaving (d-1)·2^(d-2) products (32 for d=5, 192
    for d=7).  The last level only needs traces.
    """
    comps = omega.components
    dc = comps.shape[0]
    if d is None:
        d = dc
    if d != dc:
        raise ValueError(f"form degree {d} does not match chart dimension {dc}")
    if d < 1 or d > MAX_FORM_DEGREE:
        raise ValueError(f"form degree must be in 1..{MAX_FORM_DEGREE}, got {d}")
    if d == 1:
        return np.trace(comps[0], axis1=-2, axis2=-1)

    # For odd d every cyclic rotation is an even permutation and the trace is
    # rotation invariant, so tr(ω^d) = d · tr(M_0 P({1..d-1})).
    odd = d % 2 == 1
    idx = tuple(range(1, d)) if odd else tuple(range(d))
    level = {(c,): comps[c] for c in idx}
    for size in range(2, len(idx)):
        level = {s: _combine(comps, s, level) for s in combinations(idx, size)}
    if odd:
        return d * _trace_product(comps[0], _combine(comps, idx, level))
    out = 0
    for rank, c in enumerate(idx):
        t = _trace_product(comps[c], level[idx[:rank] + idx[rank + 1 :]])
        out = out - t if rank % 2 else out + t
    return out


def _trace_product(a, b):
    # tr(A B) without forming A B
    return np.einsum("...ij,...ji->...", a, b)


def _combine(comps, subset, level):
    acc = None
    for rank, c in enumerate(subset):
        term = comps[c] @ level[subset[:rank] + subset[rank + 1 :]]
        if acc is None:
            acc = -term if rank % 2 else term
        elif rank % 2:
            acc -= term
        else:
            acc += term
    return acc


def naive_top_trace(components: np.ndarray) -> np.ndarray:
    """Reference implementation: explicit sum over all d! permutations."""
    from itertools import permutations

    d = components.shape[0]
    total = 0
    for perm in permutations(range(d)):
        inv = sum(1 for a in range(d) for b in range(a + 1, d) if perm[a] > perm[b])
        prod = components[perm[0]]
        for c in perm[1:]:
            prod = prod @ components[c]
        t = np.trace(prod, axis1=-2, axis2=-1)
        total = total - t if inv % 2 else total + t
    return total
