import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncfree import ncexpr
from ncfree.errors import ContractError, ParseError
from ncfree.ncexpr import Constant, Inverse, NCPolynomial, Product, Sum, Variable

from helpers import random_hermitian


def test_parse_example_polynomial():
    e = ncexpr.parse("x1*x2 + x2*x1 + x1^2", 2)
    assert isinstance(e, Sum)
    products = []

    def collect(node):
        if isinstance(node, Sum):
            collect(node.left)
            collect(node.right)
        else:
            products.append(node)

    collect(e)
    assert len(products) == 3 and all(isinstance(p, Product) for p in products)


def test_parse_rational_and_constant():
    e = ncexpr.parse("inv(inv(x1)+inv(x2))", 2)
    assert isinstance(e, Inverse) and isinstance(e.child, Sum)
    assert isinstance(e.child.left, Inverse) and e.child.left.child == Variable(1)
    assert ncexpr.parse("0", 1) == Constant(0)


@pytest.mark.parametrize("text", ["x3", "x1*", "inv()", "x1 +* x2", "(x1", "inv(0)"])
def test_parse_errors(text):
    with pytest.raises((ParseError, ContractError)):
        ncexpr.parse(text, 2)


def test_adjoint_examples():
    p = ncexpr.parse("x1*x2", 2)
    assert ncexpr.canonical(ncexpr.adjoint(p)) == ncexpr.canonical(ncexpr.parse("x2*x1", 2))
    q = ncexpr.parse("x1*x2+x2*x1+x1^2", 2)
    assert ncexpr.to_polynomial(ncexpr.adjoint(q), 2) == ncexpr.to_polynomial(q, 2)
    c = ncexpr.to_polynomial(ncexpr.adjoint(ncexpr.parse("(2+i)*x1", 1)), 1)
    assert dict(c.terms)[(1,)] == 2 - 1j


def test_is_selfadjoint_examples():
    assert ncexpr.is_selfadjoint(ncexpr.parse("x1*x2+x2*x1+x1^2", 2))
    assert not ncexpr.is_selfadjoint(ncexpr.parse("x1*x2", 2))
    assert ncexpr.is_selfadjoint(ncexpr.parse("inv(x1)", 1))


def test_evaluate_examples():
    x1 = np.array([[1.0, 0], [0, 0]])
    x2 = np.array([[0.0, 1], [1, 0]])
    assert np.allclose(ncexpr.evaluate(ncexpr.parse("x1", 2), [x1, x2]), x1)
    assert np.allclose(ncexpr.evaluate(ncexpr.parse("x1*x2+x2*x1+x1^2", 2), [x1, x2]), [[1, 1], [1, 0]])
    assert np.allclose(ncexpr.evaluate(ncexpr.parse("inv(x1)", 1), [np.array([[2.0]])]), [[0.5]])


def test_polynomial_normal_form():
    p = NCPolynomial.from_terms(2, [((1, 2), 1), ((1, 2), -1), ((2,), 3), ((), 0)])
    assert p.terms == (((2,), 3),)
    with pytest.raises(ContractError):
        NCPolynomial.from_terms(1, [((2,), 1)])


words = st.lists(st.integers(1, 3), min_size=0, max_size=4).map(tuple)
coefs = st.integers(-3, 3).filter(lambda c: c != 0)


@settings(max_examples=60, deadline=None)
@given(terms=st.lists(st.tuples(words, coefs), min_size=1, max_size=5), seed=st.integers(0, 2**32 - 1))
def test_string_round_trip_and_evaluation(terms, seed):
    p = NCPolynomial.from_terms(3, terms)
    if p.is_zero():
        return
    text = ncexpr.to_string(p.to_expr())
    again = ncexpr.to_polynomial(ncexpr.parse(text, 3), 3)
    assert again == p
    rng = np.random.default_rng(seed)
    X = [random_hermitian(rng, 3) for _ in range(3)]
    assert np.allclose(ncexpr.evaluate(p.to_expr(), X), p.evaluate(X))


@settings(max_examples=40, deadline=None)
@given(terms=st.lists(st.tuples(words, coefs), min_size=1, max_size=5))
def test_adjoint_is_an_involution(terms):
    p = NCPolynomial.from_terms(3, terms)
    assert p.adjoint().adjoint() == p
    assert (p.adjoint() == p) == p.is_selfadjoint()
