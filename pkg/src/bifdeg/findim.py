"""Finite-dimensional oracles and the Lyapunov-Schmidt pipeline.

A :class:`FiniteFamily` is a map f: R^q × R^N → R^N with f(λ, 0) = 0.  At a
singular parameter λ₀ the linearisation L₀ = D_u f(λ₀, 0) is split by an SVD
into kernel and cokernel bases K, C and the reduced linearisation

    R_λ = Cᵀ L_λ M_λ K,   M_λ = [Id + S Q' (L_λ - L₀)]^-1,

is formed on a small sphere around λ₀; Q' projects onto Im L₀ and S inverts
L₀ from Im L₀ back to the orthogonal complement of its kernel.  Its local
degree is the finite-dimensional bifurcation invariant.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import exprlang as E
from .dual import Dual, lift
from .forms import MatrixOneForm, from_entries, inverse, matmul

__all__ = [
    "FiniteFamily",
    "LSReduction",
    "ParityResult",
    "SearchReport",
    "NotSingularError",
    "NonIsolatedError",
    "RankAmbiguityError",
    "parity",
    "det_winding",
    "ls_reduce",
    "reduced_map",
    "bifurcation_search",
    "regularity_constant",
]

LOG = logging.getLogger(__name__)

SINGULAR_TOL = 1e-8
RANK_GAP = 1e3
COMPLEX_STEP = 1e-30


class NotSingularError(ValueError):
    """L_{λ₀} is invertible, so λ₀ is not a singular parameter."""


class NonIsolatedError(ValueError):
    """Another singular parameter was found close to λ₀."""


class RankAmbiguityError(ValueError):
    """No clear gap between zero and nonzero singular values."""


# --------------------------------------------------------------------------
# families


class FiniteFamily:
    """f(λ, u) with f(λ, 0) = 0.

    ``func(lam, u)`` takes lists of q and N scalars (arrays or
    :class:`Dual`) and returns a list of N components.  Without an explicit
    ``linear`` map, D_u f(λ, 0) is obtained by complex steps in u, which is
    exact to rounding for functions built from holomorphic operations (write
    ‖u‖² as Σ u_j², not with conjugation).
    """

    def __init__(self, q: int, N: int, func: Callable, linear: Callable | None = None, exprs=None):
        if q < 1 or N < 1:
            raise ValueError("q and N must be positive")
        self.q = q
        self.N = N
        self.func = func
        self._linear = linear
        self.exprs = exprs

    @classmethod
    def from_expressions(cls, q: int, N: int, sources: Sequence) -> "FiniteFamily":
        names = [f"l{j + 1}" for j in range(q)] + [f"u{j + 1}" for j in range(N)]
        if len(sources) != N:
            raise ValueError(f"expected {N} component expressions, got {len(sources)}")
        exprs = [s if not isinstance(s, str) else E.parse(s, names) for s in sources]
        zero_u = {f"u{j + 1}": E.Num(0j) for j in range(N)}
        lin = [[E.substitute(E.diff(e, f"u{j + 1}"), zero_u) for j in range(N)] for e in exprs]

        def env(lam, u):
            out = {f"l{j + 1}": lam[j] for j in range(q)}
            out.update({f"u{j + 1}": u[j] for j in range(N)})
            return out

        def func(lam, u):
            e = env(lam, u)
            return [E.evaluate(x, e) for x in exprs]

        def linear(lam):
            e = {f"l{j + 1}": lam[j] for j in range(q)}
            return [[E.evaluate(x, e) for x in row] for row in lin]

        return cls(q, N, func, linear, exprs)

    def value(self, lam, u) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        u = np.asarray(u)
        out = self.func(list(lam), list(u))
        return np.array([np.asarray(c) for c in out])

    def linear(self, lam) -> np.ndarray:
        """L_λ = D_u f(λ, 0) as a real N×N matrix."""
        lam = np.asarray(lam, dtype=float)
        if self._linear is not None:
            rows = self._linear(list(lam))
            return np.real(np.array([[complex(np.asarray(v)) for v in row] for row in rows]))
        return self.jacobian_u(lam, np.zeros(self.N))

    def jacobian_u(self, lam, u) -> np.ndarray:
        """D_u f(λ, u) by complex steps (exact for holomorphic expressions)."""
        lam = np.asarray(lam, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.exprs is not None:
            names = [f"u{j + 1}" for j in range(self.N)]
            point = {f"l{j + 1}": lam[j] for j in range(self.q)}
            point.update({n: u[j] for j, n in enumerate(names)})
            rows = [E.eval_dual(e, point, names).partials.real for e in self.exprs]
            return np.array(rows)
        cols = []
        for j in range(self.N):
            du = u.astype(complex)
            du[j] += 1j * COMPLEX_STEP
            cols.append(np.imag(self.value(lam, du)) / COMPLEX_STEP)
        return np.array(cols).T

    def linear_dual(self, lam: Sequence[Dual]) -> MatrixOneForm:
        """L_λ with exact partials along whatever λ is seeded with."""
        nv = lam[0].nvars
        shape = lam[0].value.shape
        if self._linear is not None:
            return from_entries([[lift(v, nv) for v in row] for row in self._linear(list(lam))], nv, shape)
        cols = []
        for j in range(self.N):
            u = [1j * COMPLEX_STEP if i == j else 0.0 for i in range(self.N)]
            out = self.func(list(lam), u)
            cols.append([lift(c, nv) for c in out])
        entries = [[_imag_part(cols[j][i]) * (1.0 / COMPLEX_STEP) for j in range(self.N)] for i in range(self.N)]
        return from_entries(entries, nv, shape)

    def check_trivial_branch(self, samples: int = 64, seed: int = 0, scale: float = 2.0) -> float:
        """max |f(λ, 0)| over random λ; must vanish (≤ 1e-12)."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for lam in rng.uniform(-scale, scale, (samples, self.q)):
            worst = max(worst, float(np.max(np.abs(self.value(lam, np.zeros(self.N))))))
        return worst


def _imag_part(d):
    if isinstance(d, Dual):
        return Dual(d.value.imag, d.partials.imag)
    return np.imag(d)


# --------------------------------------------------------------------------
# parity and winding


@dataclass
class ParityResult:
    sign: int
    crossings: int
    det_start: float
    det_end: float

    def to_dict(self) -> dict:
        return {"parity": self.sign, "crossings": self.crossings,
                "det_start": self.det_start, "det_end": self.det_end}


def parity(path: Callable[[float], np.ndarray], samples: int = 256) -> ParityResult:
    """sign det path(0) · sign det path(1), with the number of determinant sign
    changes seen on a uniform grid (each transversal crossing of the singular
    set flips the sign)."""
    d0 = float(np.linalg.det(np.asarray(path(0.0), dtype=float)))
    d1 = float(np.linalg.det(np.asarray(path(1.0), dtype=float)))
    if d0 == 0.0 or d1 == 0.0:
        raise ValueError("parity needs invertible endpoints")
    ts = np.linspace(0.0, 1.0, samples + 1)
    signs = np.sign([np.linalg.det(np.asarray(path(t), dtype=float)) for t in ts])
    nz = signs[signs != 0]
    crossings = int(np.count_nonzero(nz[1:] != nz[:-1]))
    return ParityResult(int(np.sign(d0) * np.sign(d1)), crossings, d0, d1)


def det_winding(loop: Callable[[np.ndarray], np.ndarray], samples: int = 256, max_refine: int = 8) -> int:
    """Winding number of θ ↦ det loop(θ) around 0 on [0, 2π].

    ``loop`` maps an array of angles to a stack of matrices.  The grid is
    doubled until every phase increment is below π/2.
    """
    n = samples
    for _ in range(max_refine + 1):
        theta = np.linspace(0.0, 2 * np.pi, n + 1)
        det = np.linalg.det(np.asarray(loop(theta), dtype=complex))
        scale = np.max(np.abs(det))
        if np.min(np.abs(det)) <= 1e-12 * max(scale, 1e-300):
            raise ValueError("determinant (nearly) vanishes on the loop")
        steps = np.angle(det[1:] / det[:-1])
        if np.max(np.abs(steps)) < np.pi / 2:
            return int(round(np.sum(steps) / (2 * np.pi)))
        n *= 2
    raise ValueError("phase increments did not resolve; the loop is too oscillatory")


# --------------------------------------------------------------------------
# Lyapunov-Schmidt


def _stack(cols: Sequence[np.ndarray]) -> np.ndarray:
    return np.column_stack(cols) if cols else np.zeros((0, 0))


@dataclass
class LSReduction:
    family: FiniteFamily
    lambda0: np.ndarray
    disk_radius: float
    kernel_basis: np.ndarray
    coker_basis: np.ndarray
    range_basis: np.ndarray
    complement_basis: np.ndarray
    Qprime: np.ndarray
    Sinv: np.ndarray
    singular_values: np.ndarray
    L0: np.ndarray = field(repr=False)

    @property
    def kernel_dim(self) -> int:
        return self.kernel_basis.shape[1]

    def M(self, lam) -> np.ndarray:
        L = self.family.linear(lam)
        return np.linalg.inv(np.eye(self.family.N) + self.Sinv @ self.Qprime @ (L - self.L0))

    def R(self, lam) -> np.ndarray:
        """Reduced linearisation Cᵀ L_λ M_λ K (l×l)."""
        L = self.family.linear(lam)
        return self.coker_basis.T @ L @ self.M(lam) @ self.kernel_basis

    def R_field(self, radius: float | None = None):
        """x ∈ S^{q-1} ↦ R(λ₀ + radius x) with exact chart partials, for local_degree."""
        r = self.disk_radius if radius is None else radius
        N = self.family.N
        K, C = self.kernel_basis, self.coker_basis
        SQ = self.Sinv @ self.Qprime

        def field(x):
            lam = [self.lambda0[j] + r * x[j] for j in range(self.family.q)]
            L = self.family.linear_dual(lam)
            shift = L.base - self.L0
            a = MatrixOneForm(np.eye(N) + SQ @ shift, SQ @ L.components)
            m = inverse(a)
            lm = matmul(L, m)
            return MatrixOneForm(C.T @ lm.base @ K, C.T @ lm.components @ K)

        return field

    def to_dict(self) -> dict:
        return {
            "lambda0": [float(v) for v in self.lambda0],
            "disk_radius": self.disk_radius,
            "kernel_dim": self.kernel_dim,
            "singular_values": [float(v) for v in self.singular_values],
        }


def ls_reduce(
    fam: FiniteFamily,
    lambda0,
    disk_radius: float,
    isolation_samples: int = 400,
    seed: int = 0,
) -> LSReduction:
    """Kernel/cokernel split at a singular λ₀ and the reduced linearisation."""
    lambda0 = np.asarray(lambda0, dtype=float).reshape(fam.q)
    if disk_radius <= 0:
        raise ValueError("disk_radius must be positive")
    L0 = fam.linear(lambda0)
    U, s, Vt = np.linalg.svd(L0)
    scale = max(1.0, float(s[0]))
    if s[-1] >= SINGULAR_TOL * scale:
        raise NotSingularError(f"L at lambda0 is invertible (smallest singular value {s[-1]:.3g})")
    zero = s < SINGULAR_TOL * scale
    if np.any(~zero):
        smallest_nonzero = float(np.min(s[~zero]))
        largest_zero = float(np.max(s[zero]))
        if smallest_nonzero < RANK_GAP * max(largest_zero, 1e-15 * scale) or smallest_nonzero < RANK_GAP * SINGULAR_TOL * scale:
            raise RankAmbiguityError(
                f"singular values {smallest_nonzero:.3g} / {largest_zero:.3g} give no clear rank gap"
            )
    K = Vt[zero].T.copy()
    C = U[:, zero].copy()
    Ur, Vr = U[:, ~zero], Vt[~zero].T
    sr = s[~zero]
    Qp = Ur @ Ur.T
    S = Vr @ np.diag(1.0 / sr) @ Ur.T if sr.size else np.zeros_like(L0)
    # orient so that the stabilised map L₀ + C Kᵀ has positive determinant
    if np.linalg.det(L0 + C @ K.T) < 0:
        C[:, 0] = -C[:, 0]
    red = LSReduction(fam, lambda0, float(disk_radius), K, C, Ur, Vr, Qp, S, s, L0)
    _check_isolated(red, isolation_samples, seed)
    return red


def _sigma_min(fam: FiniteFamily, lam) -> float:
    return float(np.linalg.svd(fam.linear(lam), compute_uv=False)[-1])


def _check_isolated(red: LSReduction, samples: int, seed: int) -> None:
    """Sample the smallest singular value of L_λ on the 2r-disk and polish the
    lowest samples away from λ₀; a second zero there means λ₀ is not isolated."""
    fam, lam0, r = red.family, red.lambda0, red.disk_radius
    rng = np.random.default_rng(seed)
    q = fam.q
    dirs = rng.standard_normal((samples, q))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = 2 * r * rng.uniform(0.25, 1.0, samples) ** (1.0 / q)
    pts = lam0 + dirs * radii[:, None]
    vals = np.array([_sigma_min(fam, p) for p in pts])
    for i in np.argsort(vals)[:3]:
        res = minimize(lambda v: _sigma_min(fam, v), pts[i], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400 * q})
        dist = float(np.linalg.norm(res.x - lam0))
        if res.fun < SINGULAR_TOL * max(1.0, red.singular_values[0]) and 0.1 * r < dist <= 2 * r:
            raise NonIsolatedError(f"another singular parameter near {np.round(res.x, 6).tolist()}")
    # R must be invertible on the sphere |λ - λ₀| = r
    for d in dirs[: min(64, samples)]:
        rv = np.linalg.svd(red.R(lam0 + r * d), compute_uv=False)
        if rv[-1] < SINGULAR_TOL:
            raise NonIsolatedError("reduced linearisation is singular on the isolating sphere")


def reduced_map(red: LSReduction, lam, v, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """r(λ, v) = Cᵀ f(λ, K v + x₁) where x₁ ∈ X₁ solves Q' f(λ, K v + x₁) = 0 by Newton."""
    fam = red.family
    lam = np.asarray(lam, dtype=float)
    K, Ur, Vr = red.kernel_basis, red.range_basis, red.complement_basis
    base = K @ np.asarray(v, dtype=float)
    c = np.zeros(Vr.shape[1])
    for _ in range(max_iter):
        u = base + Vr @ c
        g = Ur.T @ fam.value(lam, u).real
        if np.linalg.norm(g) <= tol:
            break
        J = Ur.T @ fam.jacobian_u(lam, u) @ Vr
        c = c - np.linalg.solve(J, g)
    else:
        raise ArithmeticError("Newton solve of the range equation did not converge")
    return red.coker_basis.T @ fam.value(lam, base + Vr @ c).real


def regularity_constant(fam: FiniteFamily, lambda0, radius: float, samples: int = 200, seed: int = 0) -> float:
    """Estimate of inf ‖L_λ x‖ / (‖λ - λ₀‖ ‖x‖) over sampled λ with 0 < ‖λ - λ₀‖ ≤ radius."""
    rng = np.random.default_rng(seed)
    lam0 = np.asarray(lambda0, dtype=float)
    best = math.inf
    for _ in range(samples):
        d = rng.standard_normal(fam.q)
        d *= radius * rng.uniform(0.05, 1.0) / np.linalg.norm(d)
        best = min(best, _sigma_min(fam, lam0 + d) / np.linalg.norm(d))
    return best


# --------------------------------------------------------------------------
# bifurcation search


@dataclass
class SearchReport:
    found: bool
    witnesses: list
    attempts: int
    radii: list

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "attempts": self.attempts,
            "radii": self.radii,
            "witnesses": [
                {"lambda": [round(float(v), 12) for v in w[0]],
                 "u": [round(float(v), 12) for v in w[1]],
                 "residual": float(w[2])}
                for w in self.witnesses
            ],
        }


def _newton_on_annulus(fam, lam, u, rho, tol, max_iter=60):
    """Gauss-Newton (minimum-norm steps) on [f(λ,u); (‖u‖² - ρ²)/2] = 0 over (λ, u)."""
    q = fam.q
    for _ in range(max_iter):
        F = np.append(fam.value(lam, u).real, 0.5 * (u @ u - rho * rho))
        if np.linalg.norm(F) <= 0.1 * tol:
            break
        Ju = fam.jacobian_u(lam, u)
        Jl = np.empty((fam.N, q))
        for j in range(q):
            dl = lam.astype(complex)
            dl[j] += 1j * COMPLEX_STEP
            Jl[:, j] = np.imag(fam.func(list(dl), list(u.astype(complex)))) / COMPLEX_STEP \
                if fam.exprs is None else _fd_lambda(fam, lam, u, j)
        J = np.vstack([np.hstack([Jl, Ju]), np.append(np.zeros(q), u)])
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        lam = lam + step[:q]
        u = u + step[q:]
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(u))):
            return None
    return lam, u


def _fd_lambda(fam, lam, u, j, h=1e-7):
    e = np.zeros(fam.q)
    e[j] = h
    return (fam.value(lam + e, u).real - fam.value(lam - e, u).real) / (2 * h)


def bifurcation_search(
    fam: FiniteFamily,
    lambda0,
    radii: Sequence[float] = (0.1, 0.05, 0.02, 0.01),
    budget: int = 8,
    seed: int = 0,
    tol: float = 1e-10,
    min_norm: float = 1e-6,
    threads: int = 1,
) -> SearchReport:
    """Look for nontrivial zeros with ‖u‖ in [ε/2, ε] for each ε in ``radii``.

    Each annulus gets ``budget`` randomised Newton starts with λ within ε of
    λ₀.  A witness needs ‖f‖ ≤ ``tol`` and ‖u‖ ≥ ``min_norm``.  Not finding
    one is a legitimate outcome.
    """
    lam0 = np.asarray(lambda0, dtype=float).reshape(fam.q)
    seeds = np.random.SeedSequence(seed).spawn(len(radii) * budget)
    jobs = [(eps, seeds[i * budget + k]) for i, eps in enumerate(radii) for k in range(budget)]

    def attempt(job):
        eps, ss = job
        rng = np.random.default_rng(ss)
        u = rng.standard_normal(fam.N)
        rho = 0.75 * eps
        u *= rho / np.linalg.norm(u)
        lam = lam0 + eps * rng.uniform(-1, 1, fam.q)
        try:
            with np.errstate(all="ignore"):
                out = _newton_on_annulus(fam, lam, u, rho, tol)
        except (np.linalg.LinAlgError, ArithmeticError, ValueError):
            return None
        if out is None:
            return None
        lam, u = out
        res = float(np.linalg.norm(fam.value(lam, u).real))
        nu = float(np.linalg.norm(u))
        if res <= tol and nu >= min_norm and 0.5 * eps <= nu <= eps:
            return (lam, u, res)
        return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(attempt, jobs))
    else:
        results = [attempt(j) for j in jobs]
    witnesses = sorted((w for w in results if w is not None),
                       key=lambda w: (-float(np.linalg.norm(w[1])), tuple(np.round(w[0], 9)), tuple(np.round(w[1], 9))))
    return SearchReport(bool(witnesses), witnesses, len(jobs), [float(r) for r in radii])
