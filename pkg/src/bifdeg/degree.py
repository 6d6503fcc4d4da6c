"""Degrees of matrix-valued maps as normalised integrals of tr((A^-1 dA)^d).

Three normalisations are provided:

* :func:`clutching_degree` for G: S^{2k-1} → GL(m, C),
  constant -(k-1)! / ((2πi)^k (2k-1)!);
* :func:`local_degree` for real R: S^{4s-1} → GL(l, R),
  constant (-1)^{s+1} (2s-1)! / ((2π)^{2s} (4s-1)!), the previous one at k = 2s;
* :func:`fedosov_degree` for σ: S^q × S^{2n-1} → GL(m, C),
  constant -(q/2+n-1)! / ((2πi)^{q/2+n} (q+2n-1)!), the same family of
  constants at k = q/2 + n.

All three are multiplied by :data:`ORIENTATION`, fixed so that the clutching
degree of diag(e^{iφ}, 1) is +1 for the positively oriented chart of
:mod:`bifdeg.quadrature`.  Flipping that single constant flips every degree
reported here.

The integral is certified by integrality: the raw value must lie within
``INTEGRALITY_TOL`` of an integer with a negligible imaginary part, otherwise
the quadrature is refined (at most ``refine_max`` times) before giving up.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .forms import MAX_FORM_DEGREE, MatrixOneForm, from_entries, maurer_cartan, top_trace_coefficient
from .numtheory import UnsupportedDimensionError
from .quadrature import ProductChart, QuadratureSpec, integrate_top_form

__all__ = [
    "ORIENTATION",
    "INTEGRALITY_TOL",
    "DegreeResult",
    "IntegralityError",
    "IndexParityError",
    "degree_constant",
    "top_form_integrand",
    "fedosov_degree",
    "local_degree",
    "clutching_degree",
    "index_degree",
    "additivity_check",
    "AdditivityReport",
]

LOG = logging.getLogger(__name__)

ORIENTATION = -1
INTEGRALITY_TOL = 1e-3


class IntegralityError(ArithmeticError):
    """The normalised integral did not settle on an integer."""

    def __init__(self, message: str, result: "DegreeResult"):
        super().__init__(message)
        self.result = result


class IndexParityError(ValueError):
    """An odd symbol degree for q = 4 mod 8, where only even values can occur."""


@dataclass
class DegreeResult:
    kind: str
    raw: complex
    rounded: int
    residual: float
    imag_leak: float
    accepted: bool
    constant: complex
    error_estimate: float
    nodes: int
    levels: list = field(default_factory=list)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "raw_real": float(self.raw.real),
            "raw_imag": float(self.raw.imag),
            "rounded": self.rounded,
            "residual": self.residual,
            "imag_leak": self.imag_leak,
            "accepted": self.accepted,
            "error_estimate": self.error_estimate,
            "nodes": self.nodes,
            "levels": self.levels,
        }


def degree_constant(k: int) -> complex:
    """-(k-1)! / ((2πi)^k (2k-1)!), the normalisation of a (2k-1)-form integral."""
    return -math.factorial(k - 1) / ((2j * math.pi) ** k * math.factorial(2 * k - 1))


def _as_form(value, nvars: int, shape) -> MatrixOneForm:
    if isinstance(value, MatrixOneForm):
        return value
    return from_entries(value, nvars, shape)


def top_form_integrand(field_fn: Callable, chart: ProductChart) -> Callable[[np.ndarray], np.ndarray]:
    """angles ↦ coefficient of the top form tr((A^-1 dA)^d) in chart coordinates."""

    def integrand(angles: np.ndarray) -> np.ndarray:
        pts = chart.dual_points(angles)
        form = _as_form(field_fn(pts), chart.dim, angles.shape[1:])
        return top_trace_coefficient(maurer_cartan(form), chart.dim)

    return integrand


def _integrate_degree(kind, field_fn, chart, constant, spec, refine_max, strict) -> DegreeResult:
    if chart.dim > MAX_FORM_DEGREE:
        raise UnsupportedDimensionError(
            f"form degree {chart.dim} exceeds the supported maximum {MAX_FORM_DEGREE}"
        )
    spec = spec or QuadratureSpec()
    if refine_max is None:
        refine_max = spec.refinement_levels
    integrand = top_form_integrand(field_fn, chart)
    start = time.perf_counter()
    levels = []
    result = None
    for level in range(refine_max + 1):
        q = integrate_top_form(chart, integrand, spec)
        raw = complex(constant * q.value)
        rounded = int(round(raw.real))
        residual = abs(raw.real - rounded)
        leak = abs(raw.imag)
        err = abs(constant) * q.error_estimate
        ok = residual <= INTEGRALITY_TOL and leak <= INTEGRALITY_TOL and err < 0.25
        levels.append({**spec.describe(), "raw_real": raw.real, "raw_imag": raw.imag, "error": err})
        result = DegreeResult(kind, raw, rounded, residual, leak, ok, constant, err, q.nodes, levels)
        if ok:
            break
        LOG.info("%s degree not integral at level %d (residual %.3g); refining", kind, level, residual)
        spec = spec.refined()
    result.seconds = time.perf_counter() - start
    if strict and not result.accepted:
        raise IntegralityError(
            f"{kind} degree did not converge to an integer after {refine_max} refinements "
            f"(raw {result.raw.real:.6g}{result.raw.imag:+.3g}i)",
            result,
        )
    return result


def _single_sphere(fn: Callable) -> Callable:
    return lambda pts: fn(pts[0])


def clutching_degree(
    g: Callable, k: int, spec: QuadratureSpec | None = None, refine_max: int | None = None, strict: bool = True
) -> DegreeResult:
    """Degree of the bundle clutched by G: S^{2k-1} → GL(m, C).

    ``g`` receives the 2k ambient coordinates of the sphere and returns an
    m×m nested list (or a :class:`MatrixOneForm`).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    chart = ProductChart([2 * k - 1])
    return _integrate_degree("clutching", _single_sphere(g), chart, ORIENTATION * degree_constant(k),
                             spec, refine_max, strict)


def local_degree(
    r: Callable, s: int, spec: QuadratureSpec | None = None, refine_max: int | None = None, strict: bool = True
) -> DegreeResult:
    """Local degree of a real matrix map R: S^{4s-1} → GL(l, R).

    ``r`` receives the 4s ambient coordinates; its entries must be real.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    chart = ProductChart([4 * s - 1])
    constant = (-1) ** (s + 1) * math.factorial(2 * s - 1) / ((2 * math.pi) ** (2 * s) * math.factorial(4 * s - 1))

    def real_field(pts):
        out = r(pts[0])
        form = _as_form(out, chart.dim, pts[0][0].value.shape)
        if np.max(np.abs(form.base.imag)) > 1e-12:
            raise ValueError("local_degree expects a real matrix field")
        return form

    return _integrate_degree("local", real_field, chart, ORIENTATION * constant, spec, refine_max, strict)


def fedosov_degree(
    sigma, spec: QuadratureSpec | None = None, refine_max: int | None = None, strict: bool = True,
    q: int | None = None, n: int | None = None, shortcut: bool = True,
) -> DegreeResult:
    """Degree of a symbol σ: S^q × S^{2n-1} → GL(m, C).

    ``sigma`` is a :class:`~bifdeg.symbol.QuotientSymbol` or any callable
    ``sigma(y, omega)`` taking the ambient coordinates of both factors, in
    which case ``q`` and ``n`` must be given.  A quotient symbol whose
    entries do not involve λ has no top-degree component at all, so with
    ``shortcut`` its degree is returned as an exact 0 without integrating.
    """
    if hasattr(sigma, "field"):
        q, n, field_fn = sigma.q, sigma.n, sigma.field
        if shortcut and q % 2 == 0 and sigma.family.lambda_independent:
            k = q // 2 + n
            return DegreeResult("fedosov", 0j, 0, 0.0, 0.0, True, ORIENTATION * degree_constant(k), 0.0, 0,
                                [{"scheme": "exact", "reason": "lambda-independent entries"}])
    else:
        if q is None or n is None:
            raise ValueError("q and n are required for a plain callable symbol")
        field_fn = lambda pts: sigma(*pts)  # noqa: E731
    if q % 2:
        raise UnsupportedDimensionError(f"the symbol degree needs even q, got q={q}")
    chart = ProductChart([q, 2 * n - 1])
    k = q // 2 + n
    return _integrate_degree("fedosov", field_fn, chart, ORIENTATION * degree_constant(k),
                             spec, refine_max, strict)


def index_degree(d_sigma: int, q: int) -> int:
    """Degree of the index bundle: d(σ) for q = 0 mod 8, d(σ)/2 for q = 4 mod 8."""
    if q % 8 == 0:
        return int(d_sigma)
    if q % 8 == 4:
        if d_sigma % 2:
            raise IndexParityError(
                f"odd symbol degree {d_sigma} with q = {q}: complexified real bundles give even values"
            )
        return int(d_sigma) // 2
    raise UnsupportedDimensionError(f"index degree defined for q = 0, 4 mod 8 only (got q={q})")


@dataclass
class AdditivityReport:
    global_degree: DegreeResult | None
    local_degrees: list
    total_local: int
    difference: float
    consistent: bool

    def to_dict(self) -> dict:
        return {
            "global": None if self.global_degree is None else self.global_degree.to_dict(),
            "local": [
                {"lambda": [float(v) for v in lam], **res.to_dict()} for lam, res in self.local_degrees
            ],
            "total_local": self.total_local,
            "difference": self.difference,
            "consistent": self.consistent,
        }


def additivity_check(
    sigma,
    isolated_points: Sequence,
    spec: QuadratureSpec | None = None,
    local_spec: QuadratureSpec | None = None,
    s: int | None = None,
    q: int | None = None,
    n: int | None = None,
    d_sigma: DegreeResult | None = None,
) -> AdditivityReport:
    """Compare d(σ) with the sum of local degrees at the isolated singular points.

    ``isolated_points`` is a list of ``(λ_i, R_i)`` with R_i a real matrix field
    on the small sphere around λ_i.  ``sigma=None`` means a λ-independent
    family, whose degree is 0 without integration.
    """
    if sigma is None:
        glob = None
        g_raw = 0.0
        q_eff = q
    else:
        glob = d_sigma or fedosov_degree(sigma, spec, q=q, n=n, strict=False)
        g_raw = glob.raw.real
        q_eff = getattr(sigma, "q", q)
    if s is None:
        if q_eff is None:
            raise ValueError("s (or q) is required")
        s = q_eff // 4
    locals_ = [(np.asarray(lam, float), local_degree(r, s, local_spec or spec, strict=False)) for lam, r in isolated_points]
    total_raw = sum(res.raw.real for _, res in locals_)
    total = sum(res.rounded for _, res in locals_)
    glob_rounded = 0 if glob is None else glob.rounded
    diff = abs(g_raw - total_raw)
    accepted = all(res.accepted for _, res in locals_) and (glob is None or glob.accepted)
    return AdditivityReport(glob, locals_, total, diff, accepted and glob_rounded == total)
