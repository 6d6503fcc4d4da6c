import pytest
from hypothesis import given
from hypothesis import strategies as st

from bifdeg.numtheory import (
    JStructure,
    UnsupportedDimensionError,
    VerdictKind,
    c_k,
    is_prime,
    j_group,
    m_function,
    n_of_q,
    nu_p,
    verdict_global,
    verdict_local,
)


@pytest.mark.parametrize("p, s, expected", [(2, 24, 3), (3, 24, 1), (5, 7, 0), (2, 1, 0), (7, 49, 2)])
def test_nu_p(p, s, expected):
    assert nu_p(p, s) == expected


@pytest.mark.parametrize("p, s", [(4, 8), (2, 0), (1, 5)])
def test_nu_p_rejects_bad_input(p, s):
    with pytest.raises(ValueError):
        nu_p(p, s)


@pytest.mark.parametrize("s, m", [(1, 2), (2, 24), (3, 2), (4, 240), (5, 2), (6, 504), (8, 480), (12, 65520)])
def test_m_function_values(s, m):
    assert m_function(s) == m


def test_m_function_rejects_zero():
    with pytest.raises(ValueError):
        m_function(0)


@pytest.mark.parametrize("q, n", [(4, 48), (8, 240), (12, 1008), (16, 480)])
def test_n_of_q(q, n):
    assert n_of_q(q) == n


@pytest.mark.parametrize("q", [1, 2, 3, 5, 6, 7, 9, 10])
def test_n_of_q_unsupported(q):
    with pytest.raises(UnsupportedDimensionError):
        n_of_q(q)


def _primes_upto(n):
    return [p for p in range(2, n + 1) if is_prime(p)]


@pytest.mark.parametrize("s", range(1, 65))
def test_m_is_even_and_exponents_follow_the_rules(s):
    m = m_function(s)
    assert m % 2 == 0
    rest = m
    for p in _primes_upto(2 * s + 1):
        if p == 2:
            expected = 2 + nu_p(2, s) if s % 2 == 0 else 1
        elif s % (p - 1) == 0:
            expected = 1 + nu_p(p, s)
        else:
            expected = 0
        assert nu_p(p, m) == expected
        rest //= p ** expected
    assert rest == 1


def test_j_group_table():
    for q in range(1, 17):
        g = j_group(q)
        if q % 8 in (1, 2):
            assert g.structure is JStructure.CYCLIC_ORDER_2 and g.order == 2
        elif q % 4 == 0:
            assert g.structure is JStructure.CYCLIC_ORDER_M and g.order == m_function(q // 2)
            assert g.order % 2 == 0
        else:
            assert g.structure is JStructure.TRIVIAL and g.order == 1
    assert str(j_group(4)) == "Z/24"
    assert str(j_group(3)) == "0"
    assert str(j_group(1)) == "Z/2"


@pytest.mark.parametrize("k, c", [(1, 1), (2, 2), (3, 4), (4, 4), (5, 8), (8, 8), (9, 1), (10, 2), (16, 8)])
def test_c_k_is_the_periodic_table(k, c):
    assert c_k(k) == c


def test_verdict_global_examples():
    v = verdict_global(1, 4)
    assert v.kind is VerdictKind.BIFURCATION_EXISTS and v.residue == 1 and v.threshold == 48
    assert verdict_global(48, 4).kind is VerdictKind.INCONCLUSIVE
    assert verdict_global(0, 8).kind is VerdictKind.INCONCLUSIVE
    with pytest.raises(UnsupportedDimensionError):
        verdict_global(1, 2)


def test_verdict_local_examples():
    assert verdict_local(1, 0, 4).kind is VerdictKind.SECOND_BIFURCATION_EXISTS
    assert verdict_local(48, 48, 4).kind is VerdictKind.INCONCLUSIVE
    assert verdict_local(1, 1, 4).kind is VerdictKind.BIFURCATION_EXISTS
    assert verdict_local(1, None, 4).kind is VerdictKind.BIFURCATION_EXISTS


@given(st.integers(-10**6, 10**6), st.sampled_from([4, 8, 12, 16, 20, 24]))
def test_verdict_invariant_under_shift_by_threshold(d, q):
    assert verdict_global(d, q).kind is verdict_global(d + n_of_q(q), q).kind


@given(st.integers(-1000, 1000), st.integers(-1000, 1000))
def test_bifurcation_verdicts_have_nonzero_residue(d0, ds):
    v = verdict_local(d0, ds, 4)
    if v.kind is not VerdictKind.INCONCLUSIVE:
        assert v.residue != 0
