"""Acceptance criteria, one printed PASS/FAIL line each.

Tolerances and budgets are pinned as module constants.  Run with ``-s`` to
see the lines inline; they are also repeated in the terminal summary.
"""

import json
import os
import re
import subprocess
import sys
import time

import numpy as np

from bifdeg.degree import clutching_degree, fedosov_degree, local_degree
from bifdeg.familyfile import read_family_file
from bifdeg.findim import bifurcation_search, det_winding, ls_reduce, parity, reduced_map
from bifdeg.models import quaternion_left, su2_matrix, two_point_model
from bifdeg.numtheory import JStructure, j_group, m_function, n_of_q
from bifdeg.quadrature import QuadratureSpec
from bifdeg.symbol import SymbolFamily, quotient_symbol
from conftest import DEMOS, ROOT

RESIDUAL_TOL = 1e-3
AC1_SECONDS = 1.0
AC2_LOOPS, AC2_SECONDS_PER_LOOP = 50, 1.0
AC3_SECONDS = 60.0
AC4_SECONDS = 120.0
AC5_SAMPLES, AC5_TOL, AC5_SECONDS = 10 ** 7, 2e-3, 600.0
AC6_PATHS, AC6_SIZE, AC6_SECONDS = 200, 5, 5.0
AC7_FAMILIES, AC7_POINTS, AC7_REL, AC7_SECONDS = 10, 16, 1e-6, 60.0
AC8_WITNESS_TOL = 1e-10
AC9_RUNS = 3

# J(S^q) for q = 1..16: Z/2 for q = 1, 2 mod 8, Z/m(q/2) for q = 4s, 0 otherwise
J_ORDERS = {1: 2, 2: 2, 3: 1, 4: 24, 5: 1, 6: 1, 7: 1, 8: 240,
            9: 2, 10: 2, 11: 1, 12: 504, 13: 1, 14: 1, 15: 1, 16: 480}


def test_ac1_number_theory_tables(criterion):
    start = time.perf_counter()
    m_ok = [m_function(s) for s in range(1, 7)] == [2, 24, 2, 240, 2, 504]
    n_ok = (n_of_q(4), n_of_q(8), n_of_q(12)) == (48, 240, 1008)
    j_ok = all(j_group(q).order == o for q, o in J_ORDERS.items())
    j_ok &= all((j_group(q).structure is JStructure.TRIVIAL) == (o == 1) for q, o in J_ORDERS.items())
    elapsed = time.perf_counter() - start
    ok = m_ok and n_ok and j_ok and elapsed < AC1_SECONDS
    criterion("AC1", ok, f"m(1..6) {m_ok}, n(4,8,12) {n_ok}, J(S^1..16) {j_ok}, {elapsed:.3f}s < {AC1_SECONDS}s")
    assert ok


# ---------------------------------------------------------------- AC2

def _matmul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[sum(a[i][t] * b[t][j] for t in range(k)) for j in range(m)] for i in range(n)]


class WindingProduct:
    """Π_j P_j D_j(z) P_j⁻¹ with D_j = diag(.., z^w_j, ..); works on arrays and duals."""

    def __init__(self, rng, m=3):
        self.m = m
        self.factors = []
        for _ in range(int(rng.integers(1, 4))):
            P = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)) + 3 * np.eye(m)
            self.factors.append((P, np.linalg.inv(P), int(rng.integers(0, m)), int(rng.integers(-2, 3))))
        self.expected = sum(f[3] for f in self.factors)

    def entries(self, z, zbar):
        out = None
        for P, Pinv, slot, w in self.factors:
            zw = 1.0
            for _ in range(abs(w)):
                zw = zw * (z if w > 0 else zbar)
            D = [[(zw if i == slot else 1.0) if i == j else 0.0 for j in range(self.m)] for i in range(self.m)]
            F = _matmul(_matmul(P.tolist(), D), Pinv.tolist())
            out = F if out is None else _matmul(out, F)
        return out

    def on_circle(self, p):
        return self.entries(p[0] + 1j * p[1], p[0] - 1j * p[1])

    def on_angles(self, t):
        z = np.exp(1j * t)
        e = self.entries(z, np.conj(z))
        return np.array([[np.broadcast_to(e[i][j], t.shape) for j in range(self.m)] for i in range(self.m)]).transpose(2, 0, 1)


def test_ac2_clutching_matches_determinant_winding(criterion):
    rng = np.random.default_rng(2024)
    agree, slowest = 0, 0.0
    for _ in range(AC2_LOOPS):
        loop = WindingProduct(rng)
        start = time.perf_counter()
        d = clutching_degree(loop.on_circle, 1).rounded
        slowest = max(slowest, time.perf_counter() - start)
        agree += d == det_winding(loop.on_angles) == loop.expected
    ok = agree == AC2_LOOPS and slowest < AC2_SECONDS_PER_LOOP
    criterion("AC2", ok, f"{agree}/{AC2_LOOPS} loops agree, slowest {slowest:.3f}s < {AC2_SECONDS_PER_LOOP}s")
    assert ok


def test_ac3_su2_degree_and_quaternion_local_degree(criterion):
    start = time.perf_counter()
    clutch = clutching_degree(su2_matrix, 2)
    elapsed = time.perf_counter() - start
    local = local_degree(quaternion_left, 1)
    first = abs(clutch.rounded) == 1 and clutch.residual <= RESIDUAL_TOL and elapsed < AC3_SECONDS
    second = local.rounded == clutch.rounded
    criterion("AC3", first and second,
              f"clutching d={clutch.rounded} residual {clutch.residual:.2e} {elapsed:.2f}s ({first}); "
              f"quaternion local_degree d={local.rounded} raw {local.raw.real:.6f} vs {clutch.rounded} ({second})")
    assert first and second


def test_ac4_fedosov_degree_sanity(criterion):
    ident = SymbolFamily(2, 1, 2, 0, [["1", "0"], ["0", "1"]], [["1", "0"], ["0", "1"]], mode="quotient")
    id_raw = fedosov_degree(quotient_symbol(ident), shortcut=False).raw
    flat = quotient_symbol(read_family_file(DEMOS / "lambda_independent_q4.fam").symbol_family())
    flat_res = fedosov_degree(flat, QuadratureSpec(order=4), shortcut=False)
    flat_ok = flat_res.rounded == 0 and flat_res.residual <= RESIDUAL_TOL
    start = time.perf_counter()
    su2 = fedosov_degree(quotient_symbol(read_family_file(DEMOS / "su2_quotient.fam").symbol_family()))
    elapsed = time.perf_counter() - start
    su2_ok = abs(su2.rounded) == 1 and su2.residual <= RESIDUAL_TOL and elapsed < AC4_SECONDS
    ok = id_raw == 0 and flat_ok and su2_ok
    criterion("AC4", ok, f"identity raw {id_raw}, lambda-independent d={flat_res.rounded} residual "
              f"{flat_res.residual:.1e}, SU(2) symbol d={su2.rounded} residual {su2.residual:.2e} {elapsed:.1f}s")
    assert ok


def test_ac5_additivity_two_point_family(criterion):
    model = two_point_model()
    start = time.perf_counter()
    glob = fedosov_degree(model, QuadratureSpec(scheme="montecarlo", samples=AC5_SAMPLES), q=4, n=1,
                          strict=False, refine_max=0)
    locals_ = [local_degree(field, 1) for _, field in model.local_fields(0.1)]
    elapsed = time.perf_counter() - start
    total_raw = sum(r.raw.real for r in locals_)
    total = sum(r.rounded for r in locals_)
    diff = abs(glob.raw.real - total_raw)
    ok = diff <= AC5_TOL and glob.rounded == total and elapsed < AC5_SECONDS
    criterion("AC5", ok, f"d(sigma) raw {glob.raw.real:.5f} (MC error {glob.error_estimate:.1e}), local "
              f"{[r.rounded for r in locals_]} sum {total}, |diff| {diff:.1e} <= {AC5_TOL}, {elapsed:.0f}s")
    assert ok


def _random_path(rng, n):
    a, b = rng.normal(size=(n, n)), rng.normal(size=(n, n))
    bumps = rng.normal(size=(2, n, n))
    return lambda t: (1 - t) * a + t * b + np.sin(np.pi * t) * bumps[0] + np.sin(2 * np.pi * t) * bumps[1]


def test_ac6_parity_properties(criterion):
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    paths = [_random_path(rng, AC6_SIZE) for _ in range(AC6_PATHS)]
    results = [parity(p) for p in paths]
    oracle = all(r.sign == np.sign(np.linalg.det(p(0.0))) * np.sign(np.linalg.det(p(1.0))) == (-1) ** r.crossings
                 for p, r in zip(paths, results))
    multiplicative = True
    for i in range(0, AC6_PATHS, 2):
        p1, p2 = paths[i], paths[i + 1]
        a, b = p1(1.0), p2(0.0)
        bridge = lambda t, a=a, b=b: (1 - t) * a + t * b  # noqa: E731
        joined = lambda t, p1=p1, p2=p2, br=bridge: p1(3 * t) if t <= 1 / 3 else (br(3 * t - 1) if t <= 2 / 3 else p2(3 * t - 2))  # noqa: E731
        multiplicative &= parity(joined).sign == results[i].sign * parity(bridge).sign * results[i + 1].sign
    elapsed = time.perf_counter() - start
    ok = oracle and multiplicative and elapsed < AC6_SECONDS
    criterion("AC6", ok, f"endpoint oracle {oracle}, concatenation {multiplicative}, {AC6_PATHS} paths {elapsed:.2f}s")
    assert ok


# ---------------------------------------------------------------- AC7

def _kernel_block(q, mu):
    if q == 1:
        return [[mu[0]]]
    if q == 2:
        return [[mu[0], -mu[1]], [mu[1], mu[0]]]
    return quaternion_left(list(mu) + [0.0] * (4 - q))


def _random_family(rng):
    """f(λ, u) = U [[B(μ), εE(μ)], [εF(μ), D]] Vᵀ u + quadratic terms, μ = λ - λ₀.

    B(μ) vanishes only at μ = 0, so λ₀ is an isolated singular parameter."""
    q = int(rng.integers(1, 5))
    l = len(_kernel_block(q, np.zeros(q)))
    N = int(rng.integers(l, 7))
    r = N - l
    lam0 = rng.uniform(-1, 1, q)
    U = np.linalg.qr(rng.normal(size=(N, N)))[0]
    V = np.linalg.qr(rng.normal(size=(N, N)))[0]
    D = rng.normal(size=(r, r)) + 3 * np.eye(r)
    E, F = 0.1 * rng.normal(size=(q, l, r)), 0.1 * rng.normal(size=(q, r, l))

    def A(mu):
        top = np.hstack([np.array(_kernel_block(q, mu), float), np.tensordot(mu, E, 1)])
        bottom = np.hstack([np.tensordot(mu, F, 1), D])
        return U @ np.vstack([top, bottom]) @ V.T

    const = A(np.zeros(q))
    slopes = [A(np.eye(q)[k]) - const for k in range(q)]
    quad = 0.5 * rng.normal(size=(N, N, N))
    comps = []
    for i in range(N):
        terms = []
        for j in range(N):
            coeff = f"{float(const[i, j])!r}" + "".join(f" + {float(slopes[k][i, j])!r}*(l{k + 1} - {float(lam0[k])!r})" for k in range(q))
            terms.append(f"({coeff})*u{j + 1}")
        terms += [f"{float(quad[i, j, k])!r}*u{j + 1}*u{k + 1}" for j in range(N) for k in range(j, N)]
        comps.append(" + ".join(terms))
    from bifdeg.findim import FiniteFamily

    return FiniteFamily.from_expressions(q, N, comps), lam0


def _sphere_points(rng, q, count, radius):
    if q == 1:
        return [np.array([s * radius * (1 - 0.05 * k)]) for k in range(count // 2) for s in (1, -1)]
    pts = rng.normal(size=(count, q))
    return [radius * p / np.linalg.norm(p) for p in pts]


def test_ac7_lyapunov_schmidt_consistency(criterion):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst, checked, shapes = 0.0, 0, []
    h = 1e-6
    for _ in range(AC7_FAMILIES):
        fam, lam0 = _random_family(rng)
        radius = 0.2
        red = ls_reduce(fam, lam0, radius)
        shapes.append((fam.q, fam.N, red.kernel_dim))
        for x in _sphere_points(rng, fam.q, AC7_POINTS, radius):
            lam = lam0 + x
            R = red.R(lam)
            fd = np.column_stack([(reduced_map(red, lam, h * e) - reduced_map(red, lam, -h * e)) / (2 * h)
                                  for e in np.eye(red.kernel_dim)])
            worst = max(worst, np.linalg.norm(fd - R) / np.linalg.norm(R))
            checked += 1
    elapsed = time.perf_counter() - start
    ok = worst <= AC7_REL and checked == AC7_FAMILIES * AC7_POINTS and elapsed < AC7_SECONDS
    criterion("AC7", ok, f"{checked} points on {AC7_FAMILIES} families (q,N,l) {shapes}, worst relative "
              f"{worst:.1e} <= {AC7_REL}, {elapsed:.1f}s")
    assert ok


def _cli_json(args):
    env = {k: v for k, v in os.environ.items() if k != "BIFDEG_THREADS"}
    proc = subprocess.run([sys.executable, "-m", "bifdeg", *args, "--output", "json"],
                          cwd=ROOT, env=env, capture_output=True, text=True, timeout=600)
    return proc.returncode, proc.stdout


def test_ac8_verdict_soundness(criterion):
    code, out = _cli_json(["local", "demos/quaternion_q4.fam", "--confirm"])
    rep = json.loads(out)
    fam = read_family_file(DEMOS / "quaternion_q4.fam").finite_family()
    witnesses = rep["search"]["witnesses"]
    residuals = [float(np.linalg.norm(fam.value(w["lambda"], w["u"]).real)) for w in witnesses]
    verdict_ok = code == 0 and rep["verdict"]["kind"] == "BifurcationExists"
    witness_ok = bool(witnesses) and all(w["residual"] <= AC8_WITNESS_TOL for w in witnesses) \
        and max(residuals) <= 10 * AC8_WITNESS_TOL
    counter = read_family_file(DEMOS / "singular_no_bifurcation.fam").finite_family()
    singular = [float(np.linalg.svd(counter.linear([t]), compute_uv=False)[-1]) for t in np.linspace(-1, 1, 9)]
    search = bifurcation_search(counter, [0.0])
    counter_ok = not search.found and max(singular) < 1e-12
    ok = verdict_ok and witness_ok and counter_ok
    criterion("AC8", ok, f"quaternion d(lambda0)={rep['local_degree']['rounded']} verdict "
              f"{rep['verdict']['kind']}, {len(witnesses)} witnesses max |f| {max(residuals, default=0):.1e}; "
              f"counterexample found={search.found} with singular L on all {len(singular)} sampled lambda")
    assert ok


def test_ac9_determinism(criterion):
    runs = {
        "local --confirm": ["local", "demos/quaternion_q4.fam", "--confirm", "--seed", "11"],
        "degree": ["degree", "demos/lambda_independent_q4.fam", "--seed", "11"],
        "oracle parity": ["oracle", "parity", "demos/path_flip.fam"],
    }
    identical = {}
    for name, args in runs.items():
        outs = {re.sub(r'"wall_clock": [^\n]*\n', "", _cli_json(args)[1]) for _ in range(AC9_RUNS)}
        identical[name] = len(outs) == 1
    ok = all(identical.values())
    criterion("AC9", ok, f"{AC9_RUNS} runs each, byte-identical without wall_clock: {identical}")
    assert ok
