import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncfree import ncexpr
from ncfree.errors import ContractError
from ncfree.linearize import (
    LinearPencil,
    expected_pencil_size,
    linearize_polynomial,
    pencil_for,
    represent_rational,
    schur_check,
    selfadjoint_linearization,
)
from ncfree.ncexpr import NCPolynomial

from helpers import random_hermitian


def schur(pencil, X):
    P = pencil.evaluate(X)
    N = X[0].shape[0]
    a, b, c, q = P[:N, :N], P[:N, N:], P[N:, :N], P[N:, N:]
    return a - b @ np.linalg.solve(q, c)


def test_constant_pencil():
    p = NCPolynomial.from_terms(1, [((), 2.5)])
    L = linearize_polynomial(p)
    assert np.allclose(L.b0, [[0, 2.5], [1, -1]])
    assert np.allclose(L.coefficient(1), 0)


def test_cubic_monomial_pencil():
    p = NCPolynomial.from_terms(3, [((1, 2, 3), 2.0)])
    L = linearize_polynomial(p)
    assert np.allclose(L.b0, [[0, 0, 0], [0, 0, -1], [0, -1, 0]])
    assert np.allclose(L.coefficient(1), [[0, 0, 2], [0, 0, 0], [0, 0, 0]])
    assert np.allclose(L.coefficient(2), [[0, 0, 0], [0, 1, 0], [0, 0, 0]])
    assert np.allclose(L.coefficient(3), [[0, 0, 0], [0, 0, 0], [1, 0, 0]])


def test_degree_five_staircase(rng):
    p = NCPolynomial.from_terms(2, [((1, 2, 1, 2, 1), 1.0)])
    L = linearize_polynomial(p)
    assert L.size == 5
    assert np.allclose(np.fliplr(L.b0)[1:, :4], -np.eye(4))
    X = [random_hermitian(rng, 3) for _ in range(2)]
    assert schur_check(L, X, p) < 1e-10


def test_pencil_size_formula():
    p = ncexpr.to_polynomial(ncexpr.parse("x1*x2+x2*x1+x1^2", 2), 2)
    assert expected_pencil_size(p) == linearize_polynomial(p).size == 4
    assert selfadjoint_linearization(p).size == 7


def test_selfadjoint_linearizations():
    x1 = selfadjoint_linearization(NCPolynomial.from_terms(1, [((1,), 1)]))
    assert x1.selfadjoint
    assert np.allclose(x1.coefficient(1), [[0, 0.5, 0], [0.5, 0, 0], [0, 0, 0]])
    one = selfadjoint_linearization(NCPolynomial.from_terms(1, [((), 1)]))
    X = [random_hermitian(np.random.default_rng(3), 2)]
    assert np.allclose(schur(one, X), np.eye(2))


def test_example_polynomial_matches_small_pencil(rng):
    p = ncexpr.parse("x1*x2+x2*x1+x1^2", 2)
    ours = pencil_for(p, 2)
    # the hand-built 3x3 selfadjoint pencil with the same Schur complement
    b0 = np.array([[0, 0, 0], [0, 0, -1], [0, -1, 0]])
    b1 = np.array([[0, 1, 0.5], [1, 0, 0], [0.5, 0, 0]])
    b2 = np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]])
    hand = LinearPencil(2, np.array([b0, b1, b2], dtype=complex))
    X = [random_hermitian(rng, 3) for _ in range(2)]
    assert np.allclose(schur(ours, X), schur(hand, X), atol=1e-10)
    assert np.allclose(schur(ours, X), ncexpr.evaluate(p, X), atol=1e-10)


def test_zero_polynomial_rejected():
    with pytest.raises(ContractError):
        pencil_for(ncexpr.parse("x1-x1", 1), 1)


def test_variable_representation():
    rep = represent_rational(ncexpr.parse("x2", 2), 2)
    assert np.allclose(rep.u, [[0, 1]]) and np.allclose(rep.v, [[0], [1]])
    q = rep.q_pencil
    assert np.allclose(q.b0, [[0, -1], [-1, 0]])
    assert np.allclose(q.coefficient(2), [[1, 0], [0, 0]])


def _show(rep, x=2, y=3):
    q = rep.q_pencil.coefficients
    return (q[0] + x * q[1] + y * q[2]).real


def test_printed_rational_representations():
    inv_x = represent_rational(ncexpr.parse("inv(x1)", 2), 2)
    assert np.allclose(inv_x.u, [[1, 0, 0]]) and np.allclose(inv_x.v.ravel(), [1, 0, 0])
    assert np.allclose(_show(inv_x), [[0, 0, 1], [0, -2, 1], [1, 1, 0]])
    s = represent_rational(ncexpr.parse("inv(x1)+inv(x2)", 2), 2)
    assert np.allclose(s.u, [[1, 0, 0, 1, 0, 0]])
    top = np.zeros((6, 6))
    top[:3, :3] = [[0, 0, 1], [0, -2, 1], [1, 1, 0]]
    top[3:, 3:] = [[0, 0, 1], [0, -3, 1], [1, 1, 0]]
    assert np.allclose(_show(s), top)
    r = represent_rational(ncexpr.parse("inv(inv(x1)+inv(x2))", 2), 2)
    assert np.allclose(r.u, [[1, 0, 0, 0, 0, 0, 0]]) and np.allclose(r.v.ravel(), [1, 0, 0, 0, 0, 0, 0])
    expected = [
        [0, 1, 0, 0, 1, 0, 0],
        [1, 0, 0, -1, 0, 0, 0],
        [0, 0, 2, -1, 0, 0, 0],
        [0, -1, -1, 0, 0, 0, 0],
        [1, 0, 0, 0, 0, 0, -1],
        [0, 0, 0, 0, 0, 3, -1],
        [0, 0, 0, 0, -1, -1, 0],
    ]
    assert np.allclose(_show(r), expected)


def test_schur_check_examples(rng):
    rep = represent_rational(ncexpr.parse("5", 1), 1)
    assert schur_check(rep, [random_hermitian(rng, 3)]) < 1e-12
    X = [random_hermitian(rng, 4) for _ in range(3)]
    mono = represent_rational(ncexpr.parse("x1*x2*x3", 3), 3)
    assert schur_check(mono, X) < 1e-10
    r = represent_rational(ncexpr.parse("inv(inv(x1)+inv(x2))", 2), 2)
    assert np.allclose(r.evaluate([np.array([[2.0]]), np.array([[3.0]])]), [[6 / 5]])
    assert schur_check(r, [np.array([[2.0]]), np.array([[3.0]])]) < 1e-12


def test_symmetric_rational_pencil(rng):
    e = ncexpr.parse("inv(inv(x1)+inv(x2))", 2)
    pencil = pencil_for(e, 2)
    assert pencil.selfadjoint and pencil.size == 15
    X = [random_hermitian(rng, 3) + 4 * np.eye(3) for _ in range(2)]
    assert np.allclose(schur(pencil, X), ncexpr.evaluate(e, X), atol=1e-10)


words = st.lists(st.integers(1, 3), min_size=0, max_size=4).map(tuple)


@settings(max_examples=60, deadline=None)
@given(terms=st.lists(st.tuples(words, st.integers(-3, 3)), min_size=1, max_size=4),
       n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_schur_identity_property(terms, n, seed):
    p = NCPolynomial.from_terms(3, terms)
    if p.is_zero():
        return
    rng = np.random.default_rng(seed)
    X = [random_hermitian(rng, n) for _ in range(3)]
    assert schur_check(linearize_polynomial(p), X, p) < 1e-10
    sa = NCPolynomial.from_terms(3, list(p.terms) + list(p.adjoint().terms))
    if not sa.is_zero():
        pencil = selfadjoint_linearization(sa)
        assert pencil.selfadjoint
        assert np.allclose(schur(pencil, X), sa.evaluate(X), atol=1e-9)
