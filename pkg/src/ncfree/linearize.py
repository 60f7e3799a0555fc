"""Linearizations of polynomials and linear representations of rational expressions.

A :class:`LinearPencil` is the affine matrix ``b0 ⊗ 1 + b1 ⊗ x1 + ... + bd ⊗ xd``.
For a polynomial ``p`` the bordered pencil ``[[0, u], [v, q]]`` satisfies
``p = -u q^{-1} v``; for a rational expression ``r`` the triple ``(u, q, v)``
with constant ``u``, ``v`` satisfies ``r = -u q^{-1} v`` wherever ``r`` is
defined.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ncexpr
from .errors import ContractError, DimensionError, SingularMatrixError
from .matalg import solve_inverse
from .ncexpr import Constant, Inverse, NCPolynomial, Product, Sum, Variable

__all__ = [
    "LinearPencil",
    "LinearRepresentation",
    "linearize_polynomial",
    "symmetrize",
    "selfadjoint_linearization",
    "represent_rational",
    "pencil_for",
    "schur_check",
    "expected_pencil_size",
]


@dataclass(frozen=True, eq=False)
class LinearPencil:
    """Affine matrix pencil with coefficients ``b0, b1, ..., bd``."""

    num_vars: int
    coefficients: np.ndarray  # shape (d + 1, n, n)
    expr: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[0] != self.num_vars + 1:
            raise DimensionError(f"bad pencil coefficient shape {c.shape} for {self.num_vars} variables")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def size(self):
        return self.coefficients.shape[1]

    @property
    def b0(self):
        return self.coefficients[0]

    def coefficient(self, k):
        return self.coefficients[k]

    @property
    def selfadjoint(self):
        c = self.coefficients
        return bool(np.array_equal(c, np.conj(np.transpose(c, (0, 2, 1)))))

    def evaluate(self, X):
        """Block matrix ``b0 ⊗ 1_N + sum_k b_k ⊗ X_k``."""
        mats = [np.asarray(x, dtype=complex) for x in X]
        if len(mats) < self.num_vars:
            raise DimensionError("not enough matrices for the pencil variables")
        N = mats[0].shape[0] if mats else 1
        out = np.kron(self.b0, np.eye(N, dtype=complex))
        for k in range(1, self.num_vars + 1):
            bk = self.coefficients[k]
            if np.any(bk):
                out = out + np.kron(bk, mats[k - 1])
        return out

    def border(self):
        """Split into ``(u, q, v)`` coefficient stacks: first row, trailing block, first column."""
        c = self.coefficients
        return c[:, 0:1, 1:], c[:, 1:, 1:], c[:, 1:, 0:1]


@dataclass(frozen=True, eq=False)
class LinearRepresentation:
    """Triple ``(u, q, v)`` with constant ``u`` (1 x n) and ``v`` (n x 1)."""

    u: np.ndarray
    q_pencil: LinearPencil
    v: np.ndarray
    expr: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex).reshape(1, -1)
        v = np.asarray(self.v, dtype=complex).reshape(-1, 1)
        n = self.q_pencil.size
        if u.shape[1] != n or v.shape[0] != n:
            raise DimensionError("u, q and v sizes disagree")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def size(self):
        return self.q_pencil.size

    @property
    def num_vars(self):
        return self.q_pencil.num_vars

    @property
    def selfadjoint(self):
        return self.q_pencil.selfadjoint and np.array_equal(self.u, self.v.conj().T)

    def as_pencil(self):
        """Bordered pencil ``[[0, u], [v, q]]`` of size ``n + 1``."""
        d, n = self.num_vars, self.size
        c = np.zeros((d + 1, n + 1, n + 1), dtype=complex)
        c[:, 1:, 1:] = self.q_pencil.coefficients
        c[0, 0, 1:] = self.u[0]
        c[0, 1:, 0] = self.v[:, 0]
        return LinearPencil(d, c, expr=self.expr)

    def evaluate(self, X):
        """``-(u ⊗ 1) q(X)^{-1} (v ⊗ 1)``."""
        qX = self.q_pencil.evaluate(X)
        N = qX.shape[0] // self.size
        eye = np.eye(N, dtype=complex)
        U = np.kron(self.u, eye)
        V = np.kron(self.v, eye)
        return -U @ solve_inverse(qX, where="q(X)") @ V


def expected_pencil_size(p):
    """Size of :func:`linearize_polynomial` output before symmetrization."""
    return 1 + sum(max(len(w) - 1, 1) for w, _ in p.terms)


def _monomial_block(word, alpha, d):
    """Linearization of ``alpha * x_{i1} ... x_{ik}`` as a (d+1, m, m) stack."""
    k = len(word)
    if k <= 1:
        blk = np.zeros((d + 1, 2, 2), dtype=complex)
        if k == 0:
            blk[0, 0, 1] = alpha
        else:
            blk[word[0], 0, 1] = alpha
        blk[0, 1, 0] = 1.0
        blk[0, 1, 1] = -1.0
        return blk
    blk = np.zeros((d + 1, k, k), dtype=complex)
    blk[word[0], 0, k - 1] = alpha
    for j in range(1, k):
        blk[word[j], j, k - 1 - j] = 1.0
        blk[0, j, k - j] = -1.0
    return blk


def linearize_polynomial(p: NCPolynomial) -> LinearPencil:
    """Bordered linearization built monomial by monomial and stacked by the sum rule."""
    if p.is_zero():
        raise ContractError("the zero polynomial has no linearization here; its distribution is delta_0")
    d = p.num_vars
    blocks = [_monomial_block(w, c, d) for w, c in p.terms]
    m = sum(b.shape[1] - 1 for b in blocks)
    coef = np.zeros((d + 1, m + 1, m + 1), dtype=complex)
    off = 1
    for b in blocks:
        s = b.shape[1] - 1
        coef[:, 0, off:off + s] = b[:, 0, 1:]
        coef[:, off:off + s, 0] = b[:, 1:, 0]
        coef[:, off:off + s, off:off + s] = b[:, 1:, 1:]
        off += s
    return LinearPencil(d, coef, expr=p)


def _double(u, q, v):
    """Selfadjoint doubling ``1/2 [[0, u, v*], [u*, 0, q*], [v, q, 0]]`` per coefficient."""
    d1, _, m = u.shape
    herm = lambda a: np.conj(np.transpose(a, (0, 2, 1)))
    c = np.zeros((d1, 1 + 2 * m, 1 + 2 * m), dtype=complex)
    c[:, 0:1, 1:1 + m] = u
    c[:, 0:1, 1 + m:] = herm(v)
    c[:, 1:1 + m, 0:1] = herm(u)
    c[:, 1:1 + m, 1 + m:] = herm(q)
    c[:, 1 + m:, 0:1] = v
    c[:, 1 + m:, 1:1 + m] = q
    return 0.5 * c


def symmetrize(p: NCPolynomial, pencil: LinearPencil) -> LinearPencil:
    if not p.is_selfadjoint():
        raise ContractError("symmetrize requires a selfadjoint polynomial")
    u, q, v = pencil.border()
    return LinearPencil(pencil.num_vars, _double(u, q, v), expr=p)


def selfadjoint_linearization(p: NCPolynomial) -> LinearPencil:
    return symmetrize(p, linearize_polynomial(p))


# --------------------------------------------------------------------------
# rational expressions
# --------------------------------------------------------------------------

def _rep(e, d):
    """Recursive assembly; returns (u, q, v) with q a (d+1, n, n) stack."""
    if isinstance(e, (Constant, Variable)):
        q = np.zeros((d + 1, 2, 2), dtype=complex)
        if isinstance(e, Constant):
            q[0, 0, 0] = e.value
        else:
            q[e.index, 0, 0] = 1.0
        q[0, 0, 1] = q[0, 1, 0] = -1.0
        return np.array([[0, 1]], dtype=complex), q, np.array([[0], [1]], dtype=complex)
    if isinstance(e, Sum):
        u1, q1, v1 = _rep(e.left, d)
        u2, q2, v2 = _rep(e.right, d)
        n1, n2 = q1.shape[1], q2.shape[1]
        q = np.zeros((d + 1, n1 + n2, n1 + n2), dtype=complex)
        q[:, :n1, :n1] = q1
        q[:, n1:, n1:] = q2
        return np.hstack([u1, u2]), q, np.vstack([v1, v2])
    if isinstance(e, Product):
        u1, q1, v1 = _rep(e.left, d)
        u2, q2, v2 = _rep(e.right, d)
        n1, n2 = q1.shape[1], q2.shape[1]
        q = np.zeros((d + 1, n1 + n2, n2 + n1), dtype=complex)
        q[0, :n1, :n2] = v1 @ u2
        q[:, :n1, n2:] = q1
        q[:, n1:, :n2] = q2
        u = np.hstack([np.zeros((1, n2), dtype=complex), u1])
        v = np.vstack([np.zeros((n1, 1), dtype=complex), v2])
        return u, q, v
    if isinstance(e, Inverse):
        u, q0, v = _rep(e.child, d)
        n = q0.shape[1]
        q = np.zeros((d + 1, n + 1, n + 1), dtype=complex)
        q[0, 0, 1:] = u[0]
        q[0, 1:, 0] = v[:, 0]
        q[:, 1:, 1:] = -q0
        e1 = np.zeros((1, n + 1), dtype=complex)
        e1[0, 0] = 1.0
        return e1, q, e1.T.copy()
    raise TypeError(f"not an expression: {e!r}")


def represent_rational(r, num_vars=None, symmetric=False) -> LinearRepresentation:
    """Linear representation of ``r`` by recursive assembly.

    With ``symmetric=True`` the top-level doubling is applied so that the
    result satisfies ``u = v*`` and ``q = q*``; ``r`` must be selfadjoint.
    """
    d = num_vars if num_vars is not None else max(ncexpr.num_vars_of(r), 1)
    u, q, v = _rep(r, d)
    if symmetric:
        if not ncexpr.is_selfadjoint(r):
            raise ContractError("symmetric representation requires a selfadjoint expression")
        dbl = _double(_lift(u, d), q, _lift(v, d))
        c = dbl[:, 1:, 1:]
        u, v = dbl[0, 0:1, 1:], dbl[0, 1:, 0:1]
        q = c
    return LinearRepresentation(u, LinearPencil(d, q), v, expr=r)


def _lift(a, d):
    out = np.zeros((d + 1,) + a.shape, dtype=complex)
    out[0] = a
    return out


def pencil_for(expr, num_vars=None) -> LinearPencil:
    """Selfadjoint bordered pencil whose (1,1) Schur complement is ``expr``.

    Polynomials go through :func:`selfadjoint_linearization`; expressions
    with inverses through :func:`represent_rational` with doubling.
    """
    d = num_vars if num_vars is not None else max(ncexpr.num_vars_of(expr), 1)
    if ncexpr.is_polynomial(expr):
        p = ncexpr.to_polynomial(expr, d)
        return selfadjoint_linearization(p)
    return represent_rational(expr, d, symmetric=True).as_pencil()


def schur_check(rep, X, expr=None):
    """Residual ``|| r(X) + U q(X)^{-1} V ||`` for a representation or pencil."""
    mats = [np.asarray(x, dtype=complex) for x in X]
    target = expr if expr is not None else rep.expr
    if target is None:
        raise ContractError("schur_check needs the represented expression")
    if isinstance(target, NCPolynomial):
        rX = target.evaluate(mats)
    else:
        rX = ncexpr.evaluate(target, mats)
    N = rX.shape[0]
    if isinstance(rep, LinearRepresentation):
        try:
            approx = rep.evaluate(mats)
        except SingularMatrixError as exc:
            raise ContractError(f"q(X) singular although r(X) is defined: representation bug ({exc})") from None
    else:
        P = rep.evaluate(mats)
        U, Q, V = P[:N, N:], P[N:, N:], P[N:, :N]
        try:
            approx = -U @ solve_inverse(Q, where="q(X)") @ V
        except SingularMatrixError as exc:
            raise ContractError(f"q(X) singular although p(X) is defined: linearization bug ({exc})") from None
    return float(np.linalg.norm(rX - approx, 2))
