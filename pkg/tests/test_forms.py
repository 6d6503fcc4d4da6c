import numpy as np
import pytest

from bifdeg.forms import (
    MatrixOneForm,
    SingularMatrixError,
    inverse,
    matmul,
    maurer_cartan,
    naive_top_trace,
    top_trace_coefficient,
)


def _random(rng, d, m, shape=()):
    base = rng.normal(size=shape + (m, m)) + 1j * rng.normal(size=shape + (m, m)) + 3 * np.eye(m)
    comps = rng.normal(size=(d,) + shape + (m, m)) + 1j * rng.normal(size=(d,) + shape + (m, m))
    return MatrixOneForm(base, comps)


def test_maurer_cartan_of_constant_identity():
    f = MatrixOneForm(np.eye(3), np.zeros((2, 3, 3)))
    np.testing.assert_array_equal(maurer_cartan(f).components, 0)


def test_maurer_cartan_scalar_log_derivative():
    theta = 0.7
    f = MatrixOneForm(np.array([[np.exp(1j * theta)]]), np.array([[[1j * np.exp(1j * theta)]]]))
    assert maurer_cartan(f).components[0, 0, 0] == pytest.approx(1j)


def test_maurer_cartan_matches_dense_multiply():
    rng = np.random.default_rng(0)
    f = _random(rng, 3, 4)
    mc = maurer_cartan(f)
    inv = np.linalg.inv(f.base)
    for c in range(3):
        np.testing.assert_allclose(mc.components[c], inv @ f.components[c], rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(mc.base, f.base)


def test_inverse_partials_and_product_rule():
    rng = np.random.default_rng(1)
    a = _random(rng, 2, 3)
    ai = inverse(a)
    prod = matmul(a, ai)
    np.testing.assert_allclose(prod.base, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(prod.components, 0, atol=1e-12)


def test_singular_base_raises():
    f = MatrixOneForm(np.zeros((2, 2)), np.zeros((1, 2, 2)))
    with pytest.raises(SingularMatrixError):
        maurer_cartan(f)


def test_ill_conditioned_base_is_logged(caplog):
    f = MatrixOneForm(np.diag([1.0, 1e-10]), np.zeros((1, 2, 2)))
    with caplog.at_level("WARNING", logger="bifdeg.forms"):
        maurer_cartan(f)
    assert "ill-conditioned" in caplog.text


def test_degree_one_is_the_trace():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(1, 3, 3))
    assert top_trace_coefficient(MatrixOneForm(np.eye(3), m), 1) == pytest.approx(np.trace(m[0]))


def test_scalars_commute_to_zero():
    rng = np.random.default_rng(3)
    for d in (2, 3, 5):
        comps = rng.normal(size=(d, 1, 1)) + 0j
        assert abs(top_trace_coefficient(MatrixOneForm(np.eye(1), comps), d)) < 1e-12


def test_degree_three_commutator_formula():
    rng = np.random.default_rng(4)
    m1, m2, m3 = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
    got = top_trace_coefficient(MatrixOneForm(np.eye(2), np.stack([m1, m2, m3])), 3)
    com = lambda a, b: a @ b - b @ a  # noqa: E731
    # the three cyclic commutator terms together are the six signed orderings
    expected = np.trace(m1 @ com(m2, m3)) + np.trace(m2 @ com(m3, m1)) + np.trace(m3 @ com(m1, m2))
    assert got == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("d, m", [(2, 3), (3, 2), (3, 4), (4, 3), (5, 2), (5, 4), (6, 2), (7, 2), (7, 3)])
def test_matches_naive_permutation_sum(d, m):
    rng = np.random.default_rng(10 * d + m)
    comps = rng.normal(size=(d, 5, m, m)) + 1j * rng.normal(size=(d, 5, m, m))
    fast = top_trace_coefficient(MatrixOneForm(np.broadcast_to(np.eye(m), (5, m, m)), comps), d)
    np.testing.assert_allclose(fast, naive_top_trace(comps), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("d", [3, 5])
def test_alternating_and_multilinear(d):
    rng = np.random.default_rng(d)
    comps = rng.normal(size=(d, 3, 3)) + 1j * rng.normal(size=(d, 3, 3))
    f = lambda c: top_trace_coefficient(MatrixOneForm(np.eye(3), c), d)  # noqa: E731
    base = f(comps)
    swapped = comps.copy()
    swapped[[0, 2]] = swapped[[2, 0]]
    assert f(swapped) == pytest.approx(-base, rel=1e-12)
    extra = rng.normal(size=(3, 3))
    a, b = comps.copy(), comps.copy()
    a[1] = 2.5 * comps[1]
    b[1] = comps[1] + extra
    c = comps.copy()
    c[1] = extra
    assert f(a) == pytest.approx(2.5 * base, rel=1e-12)
    assert f(b) == pytest.approx(base + f(c), rel=1e-10)


# m = 4 for d = 7: below that the alternating sum vanishes identically
@pytest.mark.parametrize("d, m", [(3, 3), (5, 3), (7, 4)])
def test_conjugation_invariance(d, m):
    rng = np.random.default_rng(20 + d)
    comps = rng.normal(size=(d, m, m)) + 1j * rng.normal(size=(d, m, m))
    p = rng.normal(size=(m, m)) + 3 * np.eye(m)
    pi = np.linalg.inv(p)
    conj = np.einsum("ij,cjk,kl->cil", pi, comps, p)
    a = top_trace_coefficient(MatrixOneForm(np.eye(m), comps), d)
    b = top_trace_coefficient(MatrixOneForm(np.eye(m), conj), d)
    assert abs(a - b) <= 1e-10 * abs(a)


def test_degree_mismatch_and_range():
    f = MatrixOneForm(np.eye(2), np.zeros((3, 2, 2)))
    with pytest.raises(ValueError):
        top_trace_coefficient(f, 5)
    with pytest.raises(ValueError):
        top_trace_coefficient(MatrixOneForm(np.eye(2), np.zeros((8, 2, 2))), 8)
