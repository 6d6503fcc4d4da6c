"""Charts on spheres and integration of top-degree forms over products of spheres.

A point of S^d is written with angles (θ_1, …, θ_{d-1}, φ), θ_j ∈ [0, π] and
φ ∈ [0, 2π), through

    x_1 = cos θ_1,  x_2 = sin θ_1 cos θ_2,  …,
    x_d = sin θ_1 ⋯ sin θ_{d-1} cos φ,  x_{d+1} = sin θ_1 ⋯ sin θ_{d-1} sin φ.

The angle tuple, in this order, is declared positively oriented.  An integrand
is the coefficient of dθ_1 ∧ … ∧ dφ of the pulled-back form, so integration is
plain integration over the coordinate box.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .dual import Dual

__all__ = [
    "SphereChart",
    "ProductChart",
    "QuadratureSpec",
    "QuadratureResult",
    "NonFiniteIntegrandError",
    "integrate_top_form",
    "fiber_then_base",
    "default_threads",
]

LOG = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]


class NonFiniteIntegrandError(ArithmeticError):
    """The integrand returned NaN or inf at a quadrature node."""


def default_threads() -> int:
    raw = os.environ.get("BIFDEG_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SphereChart:
    """Spherical coordinates on S^dim embedded in R^(dim+1)."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"sphere dimension must be >= 1, got {self.dim}")

    @property
    def periodic(self) -> tuple[bool, ...]:
        return (False,) * (self.dim - 1) + (True,)

    def embed(self, angles: np.ndarray) -> np.ndarray:
        """Unit vectors, shape ``(dim + 1, *S)`` for ``angles`` of shape ``(dim, *S)``."""
        return self.embed_with_partials(angles)[0]

    def jacobian_partials(self, angles: np.ndarray) -> np.ndarray:
        """∂x/∂angle_c, shape ``(dim, dim + 1, *S)``."""
        return self.embed_with_partials(angles)[1]

    def embed_with_partials(self, angles: np.ndarray):
        a = np.asarray(angles, dtype=float)
        d = self.dim
        if a.shape[0] != d:
            raise ValueError(f"expected {d} angles, got {a.shape[0]}")
        shape = a.shape[1:]
        s, c = np.sin(a), np.cos(a)
        # cumulative sine products before each coordinate
        pre = np.ones((d + 1,) + shape)
        for j in range(1, d):
            pre[j] = pre[j - 1] * s[j - 1]
        pre[d] = pre[d - 1]
        x = np.empty((d + 1,) + shape)
        for j in range(d):
            x[j] = pre[j] * c[j]
        x[d] = pre[d] * s[d - 1]

        dx = np.zeros((d, d + 1) + shape)
        for k in range(d):
            # coordinate j depends on angle k through sin θ_k (k < j) or trig(θ_k) (k == j)
            dx[k, k] = -pre[k] * s[k]
            if k == d - 1:
                dx[k, d] = pre[d] * c[d - 1]
            else:
                cot_free = pre[k] * c[k]  # pre[j] with sin θ_k replaced by cos θ_k, for j > k
                for j in range(k + 1, d + 1):
                    rest = np.ones(shape)
                    for m in range(k + 1, j if j < d else d - 1):
                        rest = rest * s[m]
                    if j < d:
                        dx[k, j] = cot_free * rest * c[j]
                    else:
                        dx[k, j] = cot_free * rest * s[d - 1]
        return x, dx

    def volume_density(self, angles: np.ndarray) -> np.ndarray:
        """Coefficient of the round volume form: ∏ sin^(dim-j) θ_j."""
        a = np.asarray(angles, dtype=float)
        out = np.ones(a.shape[1:])
        for j in range(self.dim - 1):
            out = out * np.sin(a[j]) ** (self.dim - 1 - j)
        return out

    def angles_from_points(self, x: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`embed` for points of shape ``(dim + 1, *S)``."""
        d = self.dim
        out = np.empty((d,) + x.shape[1:])
        for j in range(d - 1):
            out[j] = np.arctan2(np.sqrt(np.sum(x[j + 1 :] ** 2, axis=0)), x[j])
        out[d - 1] = np.mod(np.arctan2(x[d], x[d - 1]), 2 * np.pi)
        return out

    @property
    def box_volume(self) -> float:
        return math.pi ** (self.dim - 1) * 2 * math.pi


class ProductChart:
    """Product of sphere charts; the combined angle vector is the concatenation."""

    def __init__(self, factors: Sequence[SphereChart | int]):
        self.factors = tuple(f if isinstance(f, SphereChart) else SphereChart(int(f)) for f in factors)
        if not self.factors:
            raise ValueError("empty product chart")
        self.offsets = np.cumsum([0] + [f.dim for f in self.factors]).tolist()

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    @property
    def periodic(self) -> tuple[bool, ...]:
        return sum((f.periodic for f in self.factors), ())

    def split(self, angles: np.ndarray) -> list[np.ndarray]:
        return [angles[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def dual_points(self, angles: np.ndarray) -> list[list[Dual]]:
        """Ambient coordinates of every factor as :class:`Dual` numbers whose
        partials are taken along all chart angles of the product."""
        total = self.dim
        shape = angles.shape[1:]
        out = []
        for f, a0, part in zip(self.factors, self.offsets, self.split(angles)):
            x, dx = f.embed_with_partials(part)
            coords = []
            for j in range(f.dim + 1):
                p = np.zeros((total,) + shape, dtype=complex)
                p[a0 : a0 + f.dim] = dx[:, j]
                coords.append(Dual(x[j], p))
            out.append(coords)
        return out

    def volume_density(self, angles: np.ndarray) -> np.ndarray:
        out = np.ones(angles.shape[1:])
        for f, part in zip(self.factors, self.split(angles)):
            out = out * f.volume_density(part)
        return out


def _as_chart(chart) -> ProductChart:
    if isinstance(chart, ProductChart):
        return chart
    if isinstance(chart, SphereChart):
        return ProductChart([chart])
    return ProductChart(chart)


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature parameters.

    ``scheme`` is ``"gauss"`` (Gauss-Legendre with ``order`` nodes per polar
    angle, trapezoid with ``periodic_points`` nodes per periodic angle) or
    ``"montecarlo"`` (``samples`` points seeded by ``seed``).  The Monte Carlo
    ``sampler`` is ``"sobol"`` (scrambled Sobol points in ``replicates``
    independent scramblings, error from their spread) or ``"pseudo"``
    (pseudo-random antithetic pairs, error from the sample variance).  ``refinement_levels`` bounds how often degree
    computations may double the resolution.
    """

    scheme: str = "gauss"
    order: int = 16
    periodic_points: int | None = None
    samples: int = 200_000
    seed: int = 0
    sampler: str = "sobol"
    replicates: int = 8
    refinement_levels: int = 3
    chunk_size: int = 8192
    threads: int = field(default_factory=default_threads)

    def __post_init__(self):
        if self.scheme not in ("gauss", "montecarlo"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.order < 4 or self.order % 2:
            raise ValueError(f"Gauss order must be even and >= 4, got {self.order}")
        if self.periodic_points is not None and (self.periodic_points < 4 or self.periodic_points % 2):
            raise ValueError(f"periodic points must be even and >= 4, got {self.periodic_points}")
        if self.sampler not in ("sobol", "pseudo"):
            raise ValueError(f"unknown Monte Carlo sampler {self.sampler!r}")
        if self.replicates < 2:
            raise ValueError("need at least 2 replicates for an error estimate")
        if self.samples < 2:
            raise ValueError("Monte Carlo needs at least 2 samples")
        if self.refinement_levels < 0 or self.chunk_size < 1 or self.threads < 1:
            raise ValueError("refinement_levels, chunk_size and threads must be positive")

    @property
    def trapezoid_points(self) -> int:
        return self.periodic_points if self.periodic_points is not None else 2 * self.order

    def refined(self) -> "QuadratureSpec":
        """Next resolution level: double nodes per axis, or 4x the samples."""
        if self.scheme == "gauss":
            p = None if self.periodic_points is None else 2 * self.periodic_points
            return replace(self, order=2 * self.order, periodic_points=p)
        return replace(self, samples=4 * self.samples)

    def describe(self) -> dict:
        if self.scheme == "gauss":
            return {"scheme": "gauss", "order": self.order, "periodic_points": self.trapezoid_points}
        return {"scheme": "montecarlo", "samples": self.samples, "seed": self.seed, "sampler": self.sampler}


@dataclass
class QuadratureResult:
    value: complex
    error_estimate: float
    nodes: int
    spec: QuadratureSpec

    def __iter__(self):
        # allows ``value, err = integrate_top_form(...)``
        yield self.value
        yield self.error_estimate


def _axis_rules(periodic: Sequence[bool], sizes: tuple[int, int]):
    order, p = sizes
    gx, gw = np.polynomial.legendre.leggauss(order)
    polar = (0.5 * math.pi * (gx + 1.0), 0.5 * math.pi * gw)
    trap = ((np.arange(p) + 0.5) * (2 * math.pi / p), np.full(p, 2 * math.pi / p))
    return [trap if per else polar for per in periodic]


def _rule_sizes(spec: QuadratureSpec) -> tuple[int, int]:
    return spec.order, spec.trapezoid_points


def _coarse_sizes(spec: QuadratureSpec) -> tuple[int, int]:
    # half the nodes per axis; below the user-facing minimum on purpose so the
    # comparison rule never coincides with the fine one
    return max(2, spec.order // 2), max(2, spec.trapezoid_points // 2)


def _check_finite(vals: np.ndarray) -> None:
    if not np.all(np.isfinite(vals)):
        raise NonFiniteIntegrandError("integrand is not finite at a quadrature node")


def _run_chunks(tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: t(), tasks))


def _fsum_complex(values) -> complex:
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


def _gauss_sum(rules, integrand: Integrand, spec: QuadratureSpec) -> tuple[complex, int]:
    sizes = [len(r[0]) for r in rules]
    total = int(np.prod(sizes))
    bounds = list(range(0, total, spec.chunk_size)) + [total]

    def chunk(lo, hi):
        def run():
            idx = np.unravel_index(np.arange(lo, hi), sizes)
            angles = np.stack([r[0][i] for r, i in zip(rules, idx)])
            w = np.ones(hi - lo)
            for r, i in zip(rules, idx):
                w = w * r[1][i]
            vals = np.asarray(integrand(angles), dtype=complex)
            _check_finite(vals)
            return complex(np.sum(w * vals))

        return run

    sums = _run_chunks([chunk(a, b) for a, b in zip(bounds[:-1], bounds[1:])], spec.threads)
    return _fsum_complex(sums), total


def _gauss(chart: ProductChart, integrand: Integrand, spec: QuadratureSpec) -> QuadratureResult:
    fine, n = _gauss_sum(_axis_rules(chart.periodic, _rule_sizes(spec)), integrand, spec)
    coarse, _ = _gauss_sum(_axis_rules(chart.periodic, _coarse_sizes(spec)), integrand, spec)
    err = abs(fine - coarse) + 1e-13 * (1.0 + abs(fine))
    return QuadratureResult(fine, err, n, spec)


def _uniform_sphere_angles(chart: SphereChart, rng: np.random.Generator, count: int) -> np.ndarray:
    g = rng.standard_normal((chart.dim + 1, count))
    g /= np.sqrt(np.sum(g * g, axis=0))
    return chart.angles_from_points(g)


def _antipode(chart: SphereChart, angles: np.ndarray) -> np.ndarray:
    out = np.pi - angles
    out[-1] = np.mod(angles[-1] + np.pi, 2 * np.pi)
    return out


def _cube_to_angles(chart: ProductChart, u: np.ndarray) -> np.ndarray:
    """Map points of the unit cube (one coordinate per ambient coordinate, or a
    single one for a circle) to uniformly distributed chart angles."""
    parts = []
    col = 0
    for f in chart.factors:
        if f.dim == 1:
            parts.append(2 * math.pi * u[col:col + 1])
            col += 1
            continue
        g = ndtri(np.clip(u[col:col + f.dim + 1], 1e-16, 1 - 1e-16))
        g /= np.sqrt(np.sum(g * g, axis=0))
        parts.append(f.angles_from_points(g))
        col += f.dim + 1
    return np.concatenate(parts)


def _sphere_areas(chart: ProductChart) -> float:
    area = 1.0
    for f in chart.factors:
        area *= 2 * math.pi ** ((f.dim + 1) / 2) / math.gamma((f.dim + 1) / 2)
    return area


def _sobol(chart: ProductChart, integrand: Integrand, spec: QuadratureSpec) -> QuadratureResult:
    """Randomised quasi-Monte Carlo: independent scramblings of a Sobol sequence.

    Each replicate is an unbiased estimate; their spread gives the standard
    error.  Points per replicate are rounded to a power of two, which keeps
    the sequence balanced.
    """
    per = max(2, spec.samples // spec.replicates)
    per = 2 ** max(1, int(round(math.log2(per))))
    ncols = sum(1 if f.dim == 1 else f.dim + 1 for f in chart.factors)
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.replicates)
    bounds = list(range(0, per, spec.chunk_size)) + [per]

    def chunk(ss, lo, hi):
        def run():
            eng = qmc.Sobol(ncols, scramble=True, seed=np.random.default_rng(ss))
            if lo:
                eng.fast_forward(lo)
            angles = _cube_to_angles(chart, eng.random(hi - lo).T)
            vals = np.asarray(integrand(angles), dtype=complex)
            _check_finite(vals)
            dens = chart.volume_density(angles)
            if np.any(dens == 0):
                raise NonFiniteIntegrandError("sample landed on a chart pole")
            return complex(np.sum(vals / dens))

        return run

    tasks = [chunk(ss, a, b) for ss in seeds for a, b in zip(bounds[:-1], bounds[1:])]
    sums = _run_chunks(tasks, spec.threads)
    k = len(bounds) - 1
    means = np.array([_fsum_complex(sums[r * k:(r + 1) * k]) / per for r in range(spec.replicates)])
    area = _sphere_areas(chart)
    mean = _fsum_complex(means) / spec.replicates
    spread = math.sqrt(math.fsum(abs(m - mean) ** 2 for m in means) / (spec.replicates - 1))
    return QuadratureResult(area * mean, area * spread / math.sqrt(spec.replicates), per * spec.replicates, spec)


def _monte_carlo(chart: ProductChart, integrand: Integrand, spec: QuadratureSpec) -> QuadratureResult:
    """Uniform sampling on each sphere factor with antipodal antithetic pairs.

    The chart density is divided out, so each sample contributes the form
    evaluated on an orthonormal frame; the estimator is unbiased for the
    integral and its standard error is reported.
    """
    pairs = max(1, spec.samples // 2)
    per_chunk = max(1, spec.chunk_size // 2)
    bounds = list(range(0, pairs, per_chunk)) + [pairs]
    seeds = np.random.SeedSequence(spec.seed).spawn(len(bounds) - 1)
    area = _sphere_areas(chart)

    def chunk(lo, hi, ss):
        def run():
            rng = np.random.default_rng(ss)
            count = hi - lo
            parts = [_uniform_sphere_angles(f, rng, count) for f in chart.factors]
            anti = [_antipode(f, a) for f, a in zip(chart.factors, parts)]
            a1, a2 = np.concatenate(parts), np.concatenate(anti)
            both = np.concatenate([a1, a2], axis=1)
            vals = np.asarray(integrand(both), dtype=complex)
            _check_finite(vals)
            dens = chart.volume_density(both)
            if np.any(dens == 0):
                raise NonFiniteIntegrandError("sample landed on a chart pole")
            g = vals / dens
            y = 0.5 * (g[:count] + g[count:])
            return complex(np.sum(y)), float(np.sum(np.abs(y) ** 2))

        return run

    tasks = [chunk(a, b, s) for a, b, s in zip(bounds[:-1], bounds[1:], seeds)]
    results = _run_chunks(tasks, spec.threads)
    s1 = _fsum_complex(r[0] for r in results)
    s2 = math.fsum(r[1] for r in results)
    mean = s1 / pairs
    var = max(0.0, s2 / pairs - abs(mean) ** 2) * pairs / max(1, pairs - 1)
    return QuadratureResult(area * mean, area * math.sqrt(var / pairs), 2 * pairs, spec)


def integrate_top_form(chart, integrand: Integrand, spec: QuadratureSpec | None = None) -> QuadratureResult:
    """Integrate the top-form coefficient ``integrand`` over the chart box.

    ``integrand`` maps angles of shape ``(dim, B)`` to ``B`` complex values.
    The error estimate is |Q - Q_coarse| for Gauss (coarse = half the nodes
    per axis) and the standard error for Monte Carlo.
    """
    chart = _as_chart(chart)
    spec = spec or QuadratureSpec()
    if spec.scheme == "gauss":
        return _gauss(chart, integrand, spec)
    if spec.sampler == "sobol":
        return _sobol(chart, integrand, spec)
    return _monte_carlo(chart, integrand, spec)


def fiber_then_base(
    chart_base: SphereChart,
    chart_fiber: SphereChart,
    integrand: Integrand,
    spec: QuadratureSpec | None = None,
) -> QuadratureResult:
    """Integrate over the fiber at every base node first, then over the base.

    The integrand sees the concatenated angles (base first), like the product
    chart.  Only the Gauss scheme is nested; Monte Carlo falls back to joint
    sampling since it has no inner/outer structure.
    """
    spec = spec or QuadratureSpec()
    product = ProductChart([chart_base, chart_fiber])
    if spec.scheme != "gauss":
        return integrate_top_form(product, integrand, spec)

    def nested(s: QuadratureSpec, rule: tuple[int, int]) -> tuple[complex, int]:
        base_rules = _axis_rules(chart_base.periodic, rule)
        fiber_rules = _axis_rules(chart_fiber.periodic, rule)
        sizes = [len(r[0]) for r in base_rules]
        nb = int(np.prod(sizes))
        inner_spec = replace(s, threads=1)
        outer = []

        def at_base(i):
            def run():
                idx = np.unravel_index(i, sizes)
                b = np.array([r[0][k] for r, k in zip(base_rules, idx)])
                w = float(np.prod([r[1][k] for r, k in zip(base_rules, idx)]))

                def restricted(fa):
                    ba = np.broadcast_to(b[:, None], (b.size, fa.shape[1]))
                    return integrand(np.concatenate([ba, fa]))

                v, _ = _gauss_sum(fiber_rules, restricted, inner_spec)
                return w * v

            return run

        outer = _run_chunks([at_base(i) for i in range(nb)], s.threads)
        fiber_nodes = int(np.prod([len(r[0]) for r in fiber_rules]))
        return _fsum_complex(outer), nb * fiber_nodes

    fine, n = nested(spec, _rule_sizes(spec))
    coarse, _ = nested(spec, _coarse_sizes(spec))
    return QuadratureResult(fine, abs(fine - coarse) + 1e-13 * (1.0 + abs(fine)), n, spec)
