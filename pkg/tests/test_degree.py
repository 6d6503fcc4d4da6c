import math

import numpy as np
import pytest

from bifdeg.degree import (
    IndexParityError,
    IntegralityError,
    additivity_check,
    clutching_degree,
    degree_constant,
    fedosov_degree,
    index_degree,
    local_degree,
)
from bifdeg.findim import det_winding
from bifdeg.models import one_point_model, quaternion_left, su2_matrix, su2_symbol, winding_diag
from bifdeg.numtheory import UnsupportedDimensionError
from bifdeg.quadrature import ProductChart, QuadratureSpec, SphereChart, integrate_top_form
from bifdeg.symbol import SymbolFamily, quotient_symbol


def block(a, b):
    n, m = len(a), len(b)
    return [list(r) + [0.0] * m for r in a] + [[0.0] * n + list(r) for r in b]


def su2_inverse(x):
    return su2_matrix([x[0], -x[1], -x[2], -x[3]])


def test_degree_constant():
    assert degree_constant(1) == pytest.approx(1j / (2 * math.pi))
    assert degree_constant(2) == pytest.approx(1 / (24 * math.pi ** 2))


def test_identity_fields_give_exact_zero():
    r = clutching_degree(lambda p: [[1.0, 0.0], [0.0, 1.0]], 1)
    assert r.raw == 0 and r.rounded == 0
    assert local_degree(lambda p: [[2.0, 1.0], [0.0, 1.0]], 1).raw == 0


@pytest.mark.parametrize("w", range(-3, 4))
def test_circle_winding_matches_the_determinant_phase(w):
    r = clutching_degree(lambda p: winding_diag(p[0] + 1j * p[1], w), 1)
    oracle = det_winding(lambda t: np.array([np.diag([np.exp(1j * w * s), 1.0]) for s in t]))
    assert r.accepted and r.rounded == oracle == w


def _wzw(u, spec):
    """-(1/24π²) ∫ tr((u⁻¹du)³) by plain finite differences on the S³ chart."""
    chart = SphereChart(3)
    h = 1e-5

    def integrand(a):
        x = chart.embed(a)
        um = np.moveaxis(np.array(u(x), dtype=complex), -1, 0)
        uinv = np.linalg.inv(um)
        om = []
        for c in range(3):
            e = np.zeros((3, 1))
            e[c] = h
            du = (np.moveaxis(np.array(u(chart.embed(a + e)), dtype=complex), -1, 0)
                  - np.moveaxis(np.array(u(chart.embed(a - e)), dtype=complex), -1, 0)) / (2 * h)
            om.append(uinv @ du)
        tot = 0
        for (i, j, k), sgn in (((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                               ((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1)):
            tot = tot + sgn * np.trace(om[i] @ om[j] @ om[k], axis1=-2, axis2=-1)
        return tot

    return -integrate_top_form(ProductChart([chart]), integrand, spec).value / (24 * math.pi ** 2)


def test_su2_clutching_matches_the_wzw_integral():
    spec = QuadratureSpec(order=16)
    r = clutching_degree(su2_matrix, 2, spec)
    oracle = _wzw(su2_matrix, spec)
    assert abs(r.rounded) == 1
    assert r.raw.real == pytest.approx(oracle.real, abs=1e-6)


def test_block_additivity_and_inverse():
    z = lambda p: p[0] + 1j * p[1]  # noqa: E731
    a = clutching_degree(lambda p: block(winding_diag(z(p), 2), winding_diag(z(p), -3)), 1).rounded
    assert a == 2 - 3
    g = clutching_degree(su2_matrix, 2).rounded
    assert clutching_degree(lambda p: block(su2_matrix(p), su2_matrix(p)), 2).rounded == 2 * g
    assert clutching_degree(su2_inverse, 2).rounded == -g
    assert clutching_degree(lambda p: block(su2_matrix(p), su2_inverse(p)), 2).rounded == 0


def test_conjugation_and_homotopy_invariance():
    P = np.array([[1.0, 0.4 + 0.2j], [-0.3j, 2.0]])
    Pinv = np.linalg.inv(P)

    def conj(p):
        s = su2_symbol(*p)
        return [[sum(Pinv[i, a] * s[a][b] * P[b, j] for a in range(2) for b in range(2)) for j in range(2)]
                for i in range(2)]

    spec = QuadratureSpec(order=16)
    base = fedosov_degree(su2_symbol, spec, q=2, n=1).rounded
    assert abs(base) == 1
    assert fedosov_degree(lambda y, w: conj((y, w)), spec, q=2, n=1).rounded == base

    # (1-t) G0 + t G1 with G1 = G0 · P stays invertible since P is close to a positive matrix
    Q = np.array([[1.0, 0.2], [0.1j, 1.3]])

    def path(t):
        def g(x):
            u = su2_matrix(x)
            return [[(1 - t) * u[i][j] + t * sum(u[i][a] * Q[a, j] for a in range(2)) for j in range(2)]
                    for i in range(2)]
        return g

    values = [clutching_degree(path(t), 2, spec).rounded for t in (0.0, 0.5, 1.0)]
    assert values == [values[0]] * 3


def test_quaternion_local_degree_and_trivial_enlargement():
    r = local_degree(quaternion_left, 1)
    assert r.accepted
    # the real left-multiplication map complexifies to two copies of the SU(2) identity
    assert r.rounded == 2
    ident = [[1.0, 0.0], [0.0, 1.0]]
    assert local_degree(lambda p: block(quaternion_left(p), ident), 1).rounded == r.rounded


def test_local_degree_rejects_complex_fields():
    with pytest.raises(ValueError):
        local_degree(su2_matrix, 1)


def test_fedosov_trivial_cases():
    ident = SymbolFamily(2, 1, 2, 0, [["1", "0"], ["0", "1"]], [["1", "0"], ["0", "1"]], mode="quotient")
    assert fedosov_degree(quotient_symbol(ident), shortcut=False).raw == 0
    fam = SymbolFamily(4, 1, 1, 1, [["i*xi1"]], [["i*xi1"]])
    sig = quotient_symbol(fam)
    assert fedosov_degree(sig).levels[0]["scheme"] == "exact"
    integrated = fedosov_degree(sig, QuadratureSpec(order=4), shortcut=False)
    assert integrated.rounded == 0 and integrated.residual <= 1e-3
    with pytest.raises(UnsupportedDimensionError):
        fedosov_degree(su2_symbol, q=3, n=1)


def test_form_degree_limit():
    with pytest.raises(UnsupportedDimensionError):
        clutching_degree(lambda p: [[1.0]], 5)


def test_strict_integrality_rejects_unconverged_results():
    def sharp(p):
        z = p[0] + 1j * p[1]
        return [[z - 0.97]]

    with pytest.raises(IntegralityError) as info:
        clutching_degree(sharp, 1, QuadratureSpec(order=4), refine_max=0)
    assert not info.value.result.accepted
    loose = clutching_degree(sharp, 1, QuadratureSpec(order=4), refine_max=0, strict=False)
    assert not loose.accepted
    assert clutching_degree(sharp, 1, QuadratureSpec(order=4, periodic_points=1024)).rounded == 1


def test_index_degree():
    assert index_degree(240, 8) == 240
    assert index_degree(96, 4) == 48
    with pytest.raises(IndexParityError):
        index_degree(1, 4)
    with pytest.raises(UnsupportedDimensionError):
        index_degree(2, 2)


def test_additivity_with_no_singular_points():
    rep = additivity_check(None, [], q=4)
    assert rep.consistent and rep.total_local == 0


def test_additivity_for_the_one_point_model():
    model = one_point_model()
    spec = QuadratureSpec(scheme="montecarlo", samples=2 ** 18, seed=3)
    rep = additivity_check(model, model.local_fields(0.1), spec=spec, local_spec=QuadratureSpec(order=16), q=4, n=1)
    assert rep.consistent
    assert rep.global_degree.rounded == rep.total_local == 2
    assert rep.difference <= 1e-3


def test_degrees_agree_with_the_brouwer_oracle():
    from bifdeg.oracles import brouwer_degree, sphere_volume, su2_vector

    assert sphere_volume(3) == pytest.approx(2 * math.pi ** 2)
    s3 = SphereChart(3)
    ident = brouwer_degree(lambda a: s3.embed(a), [3], QuadratureSpec(order=12))
    assert ident == pytest.approx(1.0, abs=1e-6)
    assert clutching_degree(su2_matrix, 2).rounded == -round(ident)

    base, fiber = SphereChart(2), SphereChart(1)

    def symbol_vector(a):
        s = su2_symbol(base.embed(a[:2]), fiber.embed(a[2:]))
        return su2_vector(np.moveaxis(np.array(s, dtype=complex), -1, 0))

    b = brouwer_degree(symbol_vector, [2, 1], QuadratureSpec(order=16))
    assert abs(b - round(b)) < 1e-2
    assert fedosov_degree(su2_symbol, QuadratureSpec(order=16), q=2, n=1).rounded == -round(b)
