"""Non-commutative polynomials and rational expressions.

Expressions are immutable trees built from :class:`Constant`,
:class:`Variable`, :class:`Sum`, :class:`Product` and :class:`Inverse`.
Variables are 1-indexed (``x1 ... xd``) and selfadjoint; the adjoint reverses
products and conjugates constants.

The text grammar accepted by :func:`parse`::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | power
    power  := atom ('^' INTEGER)?
    atom   := NUMBER ['i' | 'j'] | 'i' | 'x' INTEGER
            | 'inv' '(' expr ')' | '(' expr ')'

``^k`` expands to a k-fold product and ``^0`` is the constant 1.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ContractError, DimensionError, ParseError, SingularMatrixError
from .matalg import solve_inverse

__all__ = [
    "Constant", "Variable", "Sum", "Product", "Inverse", "RationalExpr",
    "NCPolynomial", "parse", "adjoint", "canonical", "is_selfadjoint",
    "is_polynomial", "evaluate", "to_polynomial", "to_string", "num_vars_of",
]


@dataclass(frozen=True)
class Constant:
    value: complex


@dataclass(frozen=True)
class Variable:
    index: int


@dataclass(frozen=True)
class Sum:
    left: "RationalExpr"
    right: "RationalExpr"


@dataclass(frozen=True)
class Product:
    left: "RationalExpr"
    right: "RationalExpr"


@dataclass(frozen=True)
class Inverse:
    child: "RationalExpr"

    def __post_init__(self):
        if isinstance(self.child, Constant) and self.child.value == 0:
            raise ContractError("inverse of the zero constant")


RationalExpr = Union[Constant, Variable, Sum, Product, Inverse]


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?[ij]?)
      | (?P<var>x\d+)
      | (?P<inv>inv)
      | (?P<imag>[ij])(?![A-Za-z0-9])
      | (?P<op>[-+*^()])
    )""",
    re.VERBOSE,
)


def _tokenize(text):
    text = text.replace("−", "-")
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _fold_sum(a, b):
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value + b.value)
    return Sum(a, b)


def _fold_product(a, b):
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value * b.value)
    return Product(a, b)


class _Parser:
    def __init__(self, text, num_vars):
        self.tokens = _tokenize(text)
        self.i = 0
        self.num_vars = num_vars

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            if op == "-":
                rhs = _negate(rhs)
            e = _fold_sum(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] == "*":
            self.take()
            e = _fold_product(e, self.unary())
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return _negate(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise ParseError("exponent must be a non-negative integer", pos)
            k = int(text)
            if k == 0:
                return Constant(1.0 + 0j)
            e = base
            for _ in range(k - 1):
                e = _fold_product(e, base)
            return e
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            if text[-1] in "ij":
                return Constant(complex(0.0, float(text[:-1])))
            return Constant(complex(float(text)))
        if kind == "imag":
            return Constant(1j)
        if kind == "var":
            idx = int(text[1:])
            if not 1 <= idx <= self.num_vars:
                raise ParseError(f"variable {text} out of range 1..{self.num_vars}", pos)
            return Variable(idx)
        if kind == "inv":
            self.take("(")
            inner = self.expr()
            self.take(")")
            if isinstance(inner, Constant) and inner.value == 0:
                raise ParseError("inverse of zero", pos)
            return Inverse(inner)
        if text == "(":
            inner = self.expr()
            self.take(")")
            return inner
        raise ParseError(f"unexpected token {text or 'end of input'!r}", pos)


def _negate(e):
    if isinstance(e, Constant):
        return Constant(-e.value)
    return Product(Constant(-1.0 + 0j), e)


def parse(text, num_vars):
    """Parse ``text`` into an expression tree over ``x1 .. x{num_vars}``."""
    return _Parser(text, num_vars).parse()


# --------------------------------------------------------------------------
# structural operations
# --------------------------------------------------------------------------

def adjoint(e):
    if isinstance(e, Constant):
        return Constant(complex(e.value).conjugate())
    if isinstance(e, Variable):
        return e
    if isinstance(e, Sum):
        return Sum(adjoint(e.left), adjoint(e.right))
    if isinstance(e, Product):
        return Product(adjoint(e.right), adjoint(e.left))
    if isinstance(e, Inverse):
        return Inverse(adjoint(e.child))
    raise TypeError(f"not an expression: {e!r}")


def is_polynomial(e):
    if isinstance(e, (Constant, Variable)):
        return True
    if isinstance(e, Inverse):
        return False
    return is_polynomial(e.left) and is_polynomial(e.right)


def num_vars_of(e):
    """Largest variable index occurring in ``e`` (0 for constants)."""
    if isinstance(e, Variable):
        return e.index
    if isinstance(e, Constant):
        return 0
    if isinstance(e, Inverse):
        return num_vars_of(e.child)
    return max(num_vars_of(e.left), num_vars_of(e.right))


def _flatten(e, cls):
    if isinstance(e, cls):
        return _flatten(e.left, cls) + _flatten(e.right, cls)
    return [e]


def _clean(c):
    c = complex(c)
    return complex(c.real + 0.0, c.imag + 0.0)


def canonical(e):
    """Normal form used for syntactic comparisons.

    Sums are flattened and sorted, products are flattened with all constant
    factors collected in front, and both are rebuilt as left-nested chains.
    No algebraic simplification is attempted.
    """
    if isinstance(e, Constant):
        return Constant(_clean(e.value))
    if isinstance(e, Variable):
        return e
    if isinstance(e, Inverse):
        return Inverse(canonical(e.child))
    if isinstance(e, Product):
        coef = 1.0 + 0j
        factors = []
        for f in _flatten(e, Product):
            f = canonical(f)
            if isinstance(f, Constant):
                coef *= f.value
            elif isinstance(f, Product):
                for g in _flatten(f, Product):
                    if isinstance(g, Constant):
                        coef *= g.value
                    else:
                        factors.append(g)
            else:
                factors.append(f)
        if not factors or coef == 0:
            return Constant(_clean(coef))
        if coef != 1:
            factors.insert(0, Constant(_clean(coef)))
        out = factors[0]
        for f in factors[1:]:
            out = Product(out, f)
        return out
    if isinstance(e, Sum):
        terms = []
        const = 0j
        for t in _flatten(e, Sum):
            t = canonical(t)
            for s in _flatten(t, Sum):
                if isinstance(s, Constant):
                    const += s.value
                else:
                    terms.append(s)
        if const != 0 or not terms:
            terms.append(Constant(_clean(const)))
        terms.sort(key=_sort_key)
        out = terms[0]
        for t in terms[1:]:
            out = Sum(out, t)
        return out
    raise TypeError(f"not an expression: {e!r}")


def _sort_key(e):
    return (_degree(e), to_string(e))


def _degree(e):
    if isinstance(e, Constant):
        return 0
    if isinstance(e, Variable):
        return 1
    if isinstance(e, Inverse):
        return 1 + _degree(e.child)
    if isinstance(e, Product):
        return _degree(e.left) + _degree(e.right)
    return max(_degree(e.left), _degree(e.right))


def is_selfadjoint(e, tol=1e-12):
    """Syntactic selfadjointness test.

    Polynomials are compared term by term after expansion; expressions
    containing inverses are compared as canonical trees.
    """
    if is_polynomial(e):
        return to_polynomial(e).is_selfadjoint(tol)
    return canonical(adjoint(e)) == canonical(e)


def _format_number(c):
    c = _clean(c)
    re_, im = c.real, c.imag

    def fmt(x):
        if float(x).is_integer() and abs(x) < 1e15:
            return str(int(x))
        return repr(float(x))

    if im == 0:
        return fmt(re_)
    if re_ == 0:
        return f"{fmt(im)}i"
    sign = "+" if im > 0 else "-"
    return f"({fmt(re_)}{sign}{fmt(abs(im))}i)"


def to_string(e):
    if isinstance(e, Constant):
        return _format_number(e.value)
    if isinstance(e, Variable):
        return f"x{e.index}"
    if isinstance(e, Inverse):
        return f"inv({to_string(e.child)})"
    if isinstance(e, Sum):
        return f"{to_string(e.left)} + {_wrap_sum_rhs(e.right)}"
    if isinstance(e, Product):
        return f"{_wrap_factor(e.left, left=True)}*{_wrap_factor(e.right, left=False)}"
    raise TypeError(f"not an expression: {e!r}")


def _wrap_sum_rhs(e):
    s = to_string(e)
    return f"({s})" if isinstance(e, Sum) else s


def _wrap_factor(e, left):
    s = to_string(e)
    if isinstance(e, Sum) or (isinstance(e, Product) and not left):
        return f"({s})"
    return s


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def evaluate(e, X):
    """Evaluate ``e`` on a list of equally sized square matrices."""
    mats = [np.asarray(x, dtype=complex) for x in X]
    if not mats:
        raise DimensionError("need at least one matrix")
    n = mats[0].shape[0]
    for m in mats:
        if m.ndim != 2 or m.shape != (n, n):
            raise DimensionError("all matrices must be square of equal size")
    if num_vars_of(e) > len(mats):
        raise DimensionError(f"expression uses x{num_vars_of(e)} but only {len(mats)} matrices given")
    eye = np.eye(n, dtype=complex)
    return _eval(e, mats, eye)


def _eval(e, mats, eye):
    if isinstance(e, Constant):
        return e.value * eye
    if isinstance(e, Variable):
        return mats[e.index - 1]
    if isinstance(e, Sum):
        return _eval(e.left, mats, eye) + _eval(e.right, mats, eye)
    if isinstance(e, Product):
        return _eval(e.left, mats, eye) @ _eval(e.right, mats, eye)
    if isinstance(e, Inverse):
        inner = _eval(e.child, mats, eye)
        try:
            return solve_inverse(inner, where=to_string(e))
        except SingularMatrixError as exc:
            raise SingularMatrixError(exc.pivot, f"{to_string(e)} (r(X1,...,Xd) not defined)") from None
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# expanded polynomials
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NCPolynomial:
    """Expanded polynomial: ``terms`` is a tuple of ``(word, coefficient)``.

    Words are tuples of 1-based variable indices, sorted graded
    lexicographically; duplicates are merged and zero terms dropped.
    """

    num_vars: int
    terms: tuple

    @classmethod
    def from_terms(cls, num_vars, pairs):
        acc = {}
        for word, coef in pairs:
            word = tuple(int(i) for i in word)
            for i in word:
                if not 1 <= i <= num_vars:
                    raise ContractError(f"variable index {i} out of range 1..{num_vars}")
            acc[word] = acc.get(word, 0) + coef
        items = [(w, _clean(c)) for w, c in acc.items() if c != 0]
        items.sort(key=lambda wc: (len(wc[0]), wc[0]))
        return cls(num_vars, tuple(items))

    @property
    def degree(self):
        return max((len(w) for w, _ in self.terms), default=0)

    def is_zero(self):
        return not self.terms

    def adjoint(self):
        return NCPolynomial.from_terms(
            self.num_vars, [(w[::-1], complex(c).conjugate()) for w, c in self.terms])

    def is_selfadjoint(self, tol=1e-12):
        mine = dict(self.terms)
        theirs = dict(self.adjoint().terms)
        for w in set(mine) | set(theirs):
            if abs(mine.get(w, 0) - theirs.get(w, 0)) > tol:
                return False
        return True

    def to_expr(self):
        out = None
        for word, coef in self.terms:
            t = None
            for i in word:
                t = Variable(i) if t is None else Product(t, Variable(i))
            if t is None:
                t = Constant(coef)
            elif coef != 1:
                t = Product(Constant(coef), t)
            out = t if out is None else Sum(out, t)
        return out if out is not None else Constant(0j)

    def evaluate(self, X):
        return evaluate(self.to_expr(), X)


def to_polynomial(e, num_vars=None):
    """Expand a polynomial expression; raises ContractError on inverses."""
    if num_vars is None:
        num_vars = max(num_vars_of(e), 1)
    return NCPolynomial.from_terms(num_vars, _expand(e))


def _expand(e):
    if isinstance(e, Constant):
        return [((), e.value)]
    if isinstance(e, Variable):
        return [((e.index,), 1.0 + 0j)]
    if isinstance(e, Sum):
        return _expand(e.left) + _expand(e.right)
    if isinstance(e, Product):
        return [(wl + wr, cl * cr) for wl, cl in _expand(e.left) for wr, cr in _expand(e.right)]
    raise ContractError("expression contains an inverse; not a polynomial")
