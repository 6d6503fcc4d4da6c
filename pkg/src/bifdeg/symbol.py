"""Principal symbols of parametrised elliptic operators and their quotient symbol.

A :class:`SymbolFamily` stores the principal symbol p(λ, x, ξ) as an m×m
matrix of expressions in ``l1..lq, x1..xn, xi1..xin`` together with the
symbol p∞(x, ξ) of the operator at λ = ∞.  In ``principal`` mode the quotient

    σ(λ, x, ξ) = Id + χ(|x|) (p(λ, x, ξ) p∞(x, ξ)^-1 - Id)

is formed, χ being a quintic smoothstep that is 1 for |x| ≤ 0.8 R and 0 for
|x| ≥ R (R = ``support_radius`` ≤ 1).  In ``quotient`` mode the matrix
entries *are* σ and only the blend is applied.

The parameter sphere S^q = R^q ∪ {∞} is charted by inverse stereographic
projection from its last ambient coordinate, λ_j = y_j / (1 - y_{q+1}), and
the fiber S^{2n-1} is the unit sphere of (x, ξ)-space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from . import exprlang as E
from .dual import Dual, lift
from .forms import MatrixOneForm, from_entries, identity_form, inverse, matmul

__all__ = [
    "SymbolFamily",
    "SymbolCheckError",
    "CheckReport",
    "QuotientSymbol",
    "principal_symbol",
    "check_ellipticity",
    "check_reality",
    "check_infinity",
    "check_homogeneity",
    "quotient_symbol",
    "cutoff",
]

ELLIPTIC_TOL = 1e-8
REALITY_TOL = 1e-10
INFINITY_TOL = 1e-9


class SymbolCheckError(ValueError):
    """A symbol failed ellipticity, reality or λ-independence at infinity."""


def _parse_matrix(entries, names) -> tuple[tuple[E.Expr, ...], ...]:
    out = []
    for row in entries:
        out.append(tuple(e if not isinstance(e, str) else E.parse(e, names) for e in row))
    return tuple(out)


@dataclass(frozen=True)
class SymbolFamily:
    q: int
    n: int
    m: int
    k: int
    entries: tuple
    at_infinity: tuple
    support_radius: float = 1.0
    lambda_radius: float = 4.0
    mode: str = "principal"
    source: Mapping = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.q < 1 or self.n < 1 or self.m < 1 or self.m > 16 or self.k < 0:
            raise ValueError(f"bad dimensions q={self.q} n={self.n} m={self.m} k={self.k}")
        if self.mode not in ("principal", "quotient"):
            raise ValueError(f"unknown symbol mode {self.mode!r}")
        if not 0 < self.support_radius <= 1:
            raise ValueError("support_radius must lie in (0, 1]")
        if self.lambda_radius <= 0:
            raise ValueError("lambda_radius must be positive")
        names = self.variables
        object.__setattr__(self, "entries", _parse_matrix(self.entries, names))
        inf_names = [v for v in names if not v.startswith("l")]
        object.__setattr__(self, "at_infinity", _parse_matrix(self.at_infinity, inf_names))
        for mat, what in ((self.entries, "symbol"), (self.at_infinity, "infinity")):
            if len(mat) != self.m or any(len(r) != self.m for r in mat):
                raise ValueError(f"{what} matrix must be {self.m}x{self.m}")

    @property
    def lambda_independent(self) -> bool:
        """True when no entry mentions a parameter variable; then σ has no λ-derivatives."""
        return not any(v.startswith("l") for row in self.entries for e in row for v in E.free_vars(e))

    @property
    def variables(self) -> list[str]:
        return E.declared_variables(self.q, self.n, 0, t=False)

    @classmethod
    def from_coefficients(cls, q, n, m, k, coefficients, at_infinity, **kw) -> "SymbolFamily":
        """Build p = Σ_{|α|=k} a_α ξ^α from a map α -> m×m matrix of expressions."""
        names = E.declared_variables(q, n, 0, t=False)
        inf_names = [v for v in names if not v.startswith("l")]

        def assemble(coeffs, allowed):
            total = [[E.Num(0j) for _ in range(m)] for _ in range(m)]
            for alpha, mat in coeffs.items():
                alpha = tuple(alpha)
                if len(alpha) != n or sum(alpha) != k or min(alpha) < 0:
                    raise ValueError(f"multi-index {alpha} is not of order {k} in {n} variables")
                mono = E.Num(1 + 0j)
                for j, a in enumerate(alpha):
                    if a:
                        factor = E.Var(f"xi{j + 1}") if a == 1 else E.Pow(E.Var(f"xi{j + 1}"), a)
                        mono = factor if isinstance(mono, E.Num) else E.BinOp("*", mono, factor)
                mat = _parse_matrix(mat, allowed)
                for i in range(m):
                    for j in range(m):
                        term = mat[i][j]
                        if not isinstance(mono, E.Num):
                            term = E.BinOp("*", term, mono)
                        total[i][j] = term if _is_zero(total[i][j]) else E.BinOp("+", total[i][j], term)
            return total

        return cls(q, n, m, k, assemble(coefficients, names), assemble(at_infinity, inf_names), **kw)


def _is_zero(e) -> bool:
    return isinstance(e, E.Num) and e.value == 0


def _env(fam: SymbolFamily, lam, x, xi) -> dict:
    env = {}
    for j in range(fam.q):
        env[f"l{j + 1}"] = lam[j]
    for j in range(fam.n):
        env[f"x{j + 1}"] = x[j]
        env[f"xi{j + 1}"] = xi[j]
    return env


def _eval_matrix(mat, env, shape) -> np.ndarray:
    out = np.zeros(tuple(shape) + (len(mat), len(mat)), dtype=complex)
    for i, row in enumerate(mat):
        for j, e in enumerate(row):
            out[..., i, j] = E.evaluate(e, env)
    return out


def principal_symbol(fam: SymbolFamily, lam, x, xi, at_infinity: bool = False) -> np.ndarray:
    """p(λ, x, ξ) (or p∞) for batched inputs of shape ``(q|n, *S)``; returns ``(*S, m, m)``."""
    lam = np.asarray(lam, dtype=float).reshape(fam.q, -1) if np.ndim(lam) <= 1 else np.asarray(lam, float)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    scalar = x.ndim == 1
    if scalar:
        x, xi = x[:, None], xi[:, None]
        lam = lam.reshape(fam.q, 1)
    shape = x.shape[1:]
    mat = fam.at_infinity if at_infinity else fam.entries
    out = _eval_matrix(mat, _env(fam, lam, x, xi), shape)
    return out[0] if scalar else out


# --------------------------------------------------------------------------
# sampling helpers


def _sphere_points(rng, dim: int, count: int) -> np.ndarray:
    g = rng.standard_normal((dim, count))
    return g / np.linalg.norm(g, axis=0)


def _ball_points(rng, dim: int, count: int, radius: float) -> np.ndarray:
    r = radius * rng.uniform(0, 1, count) ** (1.0 / dim)
    return _sphere_points(rng, dim, count) * r


def _lambda_samples(fam: SymbolFamily, rng, count: int) -> np.ndarray:
    """Grid points in the λ-ball plus stereographic images of random points of S^q."""
    side = np.linspace(-fam.lambda_radius, fam.lambda_radius, 3 if fam.q > 2 else 5)
    grid = np.array(list(itertools.product(side, repeat=fam.q))).T
    y = _sphere_points(rng, fam.q + 1, count)
    lam = y[:-1] / (1.0 - y[-1])
    lam = lam[:, np.linalg.norm(lam, axis=0) <= 4 * fam.lambda_radius]
    return np.concatenate([grid, lam], axis=1)


@dataclass
class CheckReport:
    name: str
    passed: bool
    value: float
    threshold: float
    worst_point: dict | None = None
    samples: int = 0
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "threshold": self.threshold,
            "worst_point": self.worst_point,
            "samples": self.samples,
            "detail": self.detail,
        }


def _point_dict(fam, lam, x, xi) -> dict:
    return {
        "lambda": [float(v) for v in np.atleast_1d(lam)],
        "x": [float(v) for v in x],
        "xi": [float(v) for v in xi],
    }


def _norm_scale(p: np.ndarray) -> float:
    """max ‖p‖^m over a sample batch; a pointwise norm would make scalar symbols always pass."""
    return float(np.max(np.linalg.norm(p, ord=2, axis=(-2, -1)))) ** p.shape[-1]


def _relative_det(p: np.ndarray, scale: float) -> np.ndarray:
    det = np.abs(np.linalg.det(p))
    return det / scale if scale > 0 else np.zeros_like(det)


def check_ellipticity(fam: SymbolFamily, samples: int = 2000, seed: int = 0, tol: float = ELLIPTIC_TOL) -> CheckReport:
    """Sample |det p| / max ‖p‖^m over λ, x in the support ball and ξ on S^{n-1},
    then polish the worst samples with a local minimisation."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if fam.mode == "quotient":
        return _check_quotient_invertible(fam, samples, seed, tol)
    rng = np.random.default_rng(seed)
    lam_pool = _lambda_samples(fam, rng, samples)
    idx = rng.integers(0, lam_pool.shape[1], samples)
    lam = lam_pool[:, idx]
    x = _ball_points(rng, fam.n, samples, fam.support_radius)
    xi = _sphere_points(rng, fam.n, samples)
    p_smp = principal_symbol(fam, lam, x, xi)
    pinf_smp = principal_symbol(fam, lam, x, xi, at_infinity=True)
    scales = {False: _norm_scale(p_smp), True: _norm_scale(pinf_smp)}
    rel = _relative_det(p_smp, scales[False])
    rel_inf = _relative_det(pinf_smp, scales[True])
    worst_all = np.minimum(rel, rel_inf)
    order = np.argsort(worst_all)[:3]

    def objective(v, use_inf):
        l, xx, ang = v[: fam.q], v[fam.q : fam.q + fam.n], v[fam.q + fam.n :]
        nrm = np.linalg.norm(ang)
        if nrm == 0:
            return 1.0
        p = principal_symbol(fam, l, xx, ang / nrm, at_infinity=use_inf)
        return float(_relative_det(p[None], scales[use_inf])[0])

    best = (float(worst_all[order[0]]), lam[:, order[0]], x[:, order[0]], xi[:, order[0]])
    for i in order:
        use_inf = bool(rel_inf[i] < rel[i])
        v0 = np.concatenate([lam[:, i], x[:, i], xi[:, i]])
        try:
            res = minimize(objective, v0, args=(use_inf,), method="Nelder-Mead",
                           options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        except (E.EvaluationError, np.linalg.LinAlgError):
            continue
        xx = res.x[fam.q : fam.q + fam.n]
        if np.linalg.norm(xx) > fam.support_radius:
            continue
        if res.fun < best[0]:
            ang = res.x[fam.q + fam.n :]
            best = (float(res.fun), res.x[: fam.q], xx, ang / np.linalg.norm(ang))
    min_abs = float(np.min(np.abs(np.linalg.det(p_smp))))
    return CheckReport(
        "ellipticity",
        best[0] >= tol,
        best[0],
        tol,
        _point_dict(fam, *best[1:]),
        samples,
        f"min |det p| over samples = {min_abs:.6g}",
    )


def check_reality(fam: SymbolFamily, samples: int = 2000, seed: int = 0, tol: float = REALITY_TOL) -> CheckReport:
    """max |p(λ,x,-ξ) - conj p(λ,x,ξ)| relative to max ‖p‖ over the samples."""
    if fam.mode == "quotient":
        return CheckReport("reality", True, 0.0, tol, None, 0, "not applicable to a quotient-mode symbol")
    rng = np.random.default_rng(seed + 1)
    lam_pool = _lambda_samples(fam, rng, samples)
    lam = lam_pool[:, rng.integers(0, lam_pool.shape[1], samples)]
    x = _ball_points(rng, fam.n, samples, fam.support_radius)
    xi = _sphere_points(rng, fam.n, samples) * rng.uniform(0.5, 2.0, samples)
    worst, where = 0.0, None
    scale = 0.0
    for inf in (False, True):
        p = principal_symbol(fam, lam, x, xi, at_infinity=inf)
        pm = principal_symbol(fam, lam, x, -xi, at_infinity=inf)
        gap = np.max(np.abs(pm - np.conj(p)), axis=(-2, -1))
        scale = max(scale, float(np.max(np.linalg.norm(p, ord=2, axis=(-2, -1)))))
        i = int(np.argmax(gap))
        if gap[i] > worst:
            worst, where = float(gap[i]), _point_dict(fam, lam[:, i], x[:, i], xi[:, i])
    rel = worst / scale if scale > 0 else worst
    return CheckReport("reality", rel <= tol, rel, tol, where, samples)


def check_infinity(fam: SymbolFamily, samples: int = 500, seed: int = 0, tol: float = INFINITY_TOL) -> CheckReport:
    """λ-independence for |λ| ≥ lambda_radius: p(λ) = p∞ (principal mode) or σ = Id (quotient mode)."""
    rng = np.random.default_rng(seed + 2)
    dirs = _sphere_points(rng, fam.q, samples)
    lam = dirs * fam.lambda_radius * rng.uniform(1.0, 10.0, samples)
    x = _ball_points(rng, fam.n, samples, fam.support_radius)
    xi = _sphere_points(rng, fam.n, samples)
    p = principal_symbol(fam, lam, x, xi)
    if fam.mode == "quotient":
        ref = np.broadcast_to(np.eye(fam.m), p.shape)
    else:
        ref = principal_symbol(fam, lam, x, xi, at_infinity=True)
    gap = np.max(np.abs(p - ref), axis=(-2, -1))
    scale = np.maximum(1.0, np.linalg.norm(ref, ord=2, axis=(-2, -1)))
    rel = gap / scale
    i = int(np.argmax(rel))
    return CheckReport(
        "lambda_independence_at_infinity",
        float(rel[i]) <= tol,
        float(rel[i]),
        tol,
        _point_dict(fam, lam[:, i], x[:, i], xi[:, i]),
        samples,
    )


def check_homogeneity(fam: SymbolFamily, samples: int = 200, seed: int = 0) -> float:
    """Largest relative deviation from p(λ,x,tξ) = t^k p(λ,x,ξ) on random samples."""
    rng = np.random.default_rng(seed + 3)
    lam = rng.uniform(-fam.lambda_radius, fam.lambda_radius, (fam.q, samples))
    x = _ball_points(rng, fam.n, samples, fam.support_radius)
    xi = _sphere_points(rng, fam.n, samples)
    t = rng.uniform(0.25, 4.0, samples)
    p1 = principal_symbol(fam, lam, x, xi)
    pt = principal_symbol(fam, lam, x, xi * t)
    dev = np.abs(pt - t[:, None, None] ** fam.k * p1).max(axis=(-2, -1))
    return float(np.max(dev / np.maximum(1e-300, np.abs(pt).max(axis=(-2, -1)))))


def _check_quotient_invertible(fam, samples, seed, tol) -> CheckReport:
    rng = np.random.default_rng(seed)
    lam_pool = _lambda_samples(fam, rng, samples)
    lam = lam_pool[:, rng.integers(0, lam_pool.shape[1], samples)]
    w = _sphere_points(rng, 2 * fam.n, samples)
    x, xi = w[: fam.n], w[fam.n :]
    chi = cutoff(np.sum(x * x, axis=0), fam.support_radius)
    s = principal_symbol(fam, lam, x, xi)
    s = np.eye(fam.m) + chi[:, None, None] * (s - np.eye(fam.m))
    rel = _relative_det(s, _norm_scale(s))
    i = int(np.argmin(rel))
    return CheckReport(
        "ellipticity", float(rel[i]) >= tol, float(rel[i]), tol,
        _point_dict(fam, lam[:, i], x[:, i], xi[:, i]), samples,
        "quotient mode: invertibility of the blended symbol on S^q x S^(2n-1)",
    )


# --------------------------------------------------------------------------
# cutoff and quotient


def _smoothstep(t):
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def cutoff(r2, radius: float):
    """χ as a function of r² = |x|²: 1 for |x| ≤ 0.8 R, 0 for |x| ≥ R, quintic smoothstep in |x| between.

    Accepts arrays or :class:`Dual`; the Dual branch differentiates through |x|.
    """
    lo, hi = 0.8 * radius, radius
    if isinstance(r2, Dual):
        v = r2.value.real
        r = np.sqrt(np.maximum(v, 0.0))
        t = np.clip((hi - r) / (hi - lo), 0.0, 1.0)
        val = _smoothstep(t)
        inside = (t > 0) & (t < 1)
        # d/dr of the smoothstep in t, chained through dr = dr2 / (2r)
        ds = 30.0 * t * t * (1 - t) ** 2 * (-1.0 / (hi - lo))
        with np.errstate(divide="ignore", invalid="ignore"):
            dr_dr2 = np.where(inside, 0.5 / np.where(r > 0, r, 1.0), 0.0)
        return Dual(val, (ds * dr_dr2) * r2.partials.real)
    r = np.sqrt(np.maximum(np.asarray(r2, dtype=float), 0.0))
    return _smoothstep(np.clip((hi - r) / (hi - lo), 0.0, 1.0))


class QuotientSymbol:
    """σ on S^q × S^{2n-1} with exact partials along the product chart.

    Use :meth:`field` as the matrix field of a degree computation: it takes the
    ambient coordinates of both sphere factors as :class:`Dual` numbers.
    """

    def __init__(self, family: SymbolFamily):
        self.family = family

    @property
    def q(self) -> int:
        return self.family.q

    @property
    def n(self) -> int:
        return self.family.n

    @property
    def m(self) -> int:
        return self.family.m

    def field(self, points: Sequence[Sequence[Dual]]) -> MatrixOneForm:
        fam = self.family
        y, w = points
        nv = y[0].nvars
        shape = y[0].value.shape
        m = fam.m
        base = np.broadcast_to(np.eye(m, dtype=complex), shape + (m, m)).copy()
        comps = np.zeros((nv,) + shape + (m, m), dtype=complex)

        # stereographic parameter; beyond lambda_radius σ is the identity
        denom = 1.0 - y[fam.q].value.real
        num2 = sum(np.abs(c.value) ** 2 for c in y[: fam.q])
        with np.errstate(divide="ignore", invalid="ignore"):
            lam_norm2 = np.where(denom > 0, num2 / np.where(denom > 0, denom, 1.0) ** 2, np.inf)
        near = lam_norm2 <= fam.lambda_radius ** 2
        x = w[: fam.n]
        r2 = sum(c * c for c in x)
        chi = cutoff(r2, fam.support_radius)
        active = near & (chi.value.real > 0)
        if not np.any(active):
            return MatrixOneForm(base, comps)

        sub = np.nonzero(active)
        ys = [c[sub] for c in y]
        ws = [c[sub] for c in w]
        chis = chi[sub]
        lam = [c / (1.0 - ys[fam.q]) for c in ys[: fam.q]]
        env = _env(fam, lam, ws[: fam.n], ws[fam.n :])
        sshape = chis.value.shape

        def matrix(mat, env):
            vals = [[lift(E.evaluate(e, env), nv) for e in row] for row in mat]
            return from_entries(vals, nv, sshape)

        if fam.mode == "quotient":
            sig = matrix(fam.entries, env)
        else:
            p = matrix(fam.entries, env)
            pinf = matrix(fam.at_infinity, env)
            sig = matmul(p, inverse(pinf))
        eye = identity_form(m, nv, sshape)
        delta = sig.base - eye.base
        cval = chis.value[..., None, None]
        base[sub] = eye.base + cval * delta
        comps[(slice(None),) + sub] = chis.partials[..., None, None] * delta + cval * sig.components
        return MatrixOneForm(base, comps)

    def evaluate(self, lam_angles, omega_angles) -> MatrixOneForm:
        """σ and its partials at chart points of S^q and S^{2n-1}."""
        from .quadrature import ProductChart

        chart = ProductChart([self.q, 2 * self.n - 1])
        angles = np.concatenate([np.atleast_2d(np.asarray(lam_angles, float).T).T,
                                 np.atleast_2d(np.asarray(omega_angles, float).T).T])
        return self.field(chart.dual_points(angles))


def quotient_symbol(fam: SymbolFamily, check: bool = True, samples: int = 2000, seed: int = 0) -> QuotientSymbol:
    """Form σ after verifying ellipticity and λ-independence at infinity."""
    if check:
        for rep in (check_ellipticity(fam, samples, seed), check_infinity(fam, max(100, samples // 4), seed)):
            if not rep.passed:
                raise SymbolCheckError(f"{rep.name} check failed: {rep.value:.3g} vs threshold {rep.threshold:.3g}")
    return QuotientSymbol(fam)
