"""Operator-valued additive free convolution by subordination.

For free ``Y1``, ``Y2`` with Cauchy transforms ``G1``, ``G2`` and
``h_j(w) = G_j(w)^{-1} - w``, the subordination function ``omega1(z)`` is
the fixed point of ``f_z(w) = h2(h1(w) + z) + z``; then
``omega2 = z + h1(omega1)`` and ``G_{Y1+Y2}(z) = G1(omega1) = G2(omega2)``.
Sums of more than two free summands are handled by a left fold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cauchy import (
    MAXITER,
    ConstantEvaluator,
    FixedPointInfo,
    SemicircularEvaluator,
    amplify,
    damped_iterate,
    summand_evaluator,
)
from .errors import ContractError, DimensionError
from .matalg import as_matrix, hermitian_eigvalsh, imaginary_part, solve_inverse

__all__ = [
    "SubordinationState",
    "h_transform",
    "subordinate",
    "ConvolvedEvaluator",
    "PencilEvaluator",
    "convolve_pencil",
    "evaluator_for_pencil",
]

SUB_TOL = 1e-12
ANDERSON_DEPTH = 5


@dataclass
class SubordinationState:
    omega1: np.ndarray
    omega2: np.ndarray
    G: np.ndarray
    residual: float
    consistency: float
    iterations: int

    def im_gaps(self, z):
        """Smallest eigenvalues of ``Im omega_j - Im z`` for ``j = 1, 2``."""
        imz = imaginary_part(z)
        return tuple(float(hermitian_eigvalsh(imaginary_part(w) - imz)[0]) for w in (self.omega1, self.omega2))


def h_transform(G, z, state=None):
    """``G(z)^{-1} - z``."""
    z = as_matrix(z, square=True)
    return solve_inverse(G(z, state), where="h_transform") - z


def _strict_upper(w):
    return hermitian_eigvalsh(imaginary_part(w))[0] > 0


def subordinate(left, right, z, state=None, *, w0=None, tol=SUB_TOL, maxiter=MAXITER, alpha=1.0,
                anderson=ANDERSON_DEPTH):
    """Solve the two-summand subordination problem at ``z``.

    The fixed point of ``f_z`` is found by damped iteration from ``w0 = z``
    (or the warm start stored in ``state``), accelerated by Anderson mixing
    of depth ``anderson`` unless that is 0.

    Returns
    -------
    SubordinationState
        ``residual`` is ``||f_z(omega1) - omega1||`` and ``consistency`` is
        ``||F2(omega2) + z - omega1 - omega2||``.

    Raises
    ------
    ConvergenceError
        When the damped iteration hits its cap.
    """
    z = as_matrix(z, square=True)
    key = (id(left), id(right), z.shape[0])
    if w0 is None:
        w0 = state.get(key) if state is not None else None
        if w0 is None:
            w0 = z

    def f(w):
        return h_transform(right, h_transform(left, w, state) + z, state) + z

    info = FixedPointInfo()
    omega1 = damped_iterate(f, w0, alpha, tol=tol, maxiter=maxiter, auto_damp=True, anderson=anderson,
                            domain=_strict_upper, info=info, what="subordination")
    g1 = left(omega1, state)
    f1 = solve_inverse(g1, where="F1(omega1)")
    omega2 = f1 - omega1 + z
    g2 = right(omega2, state)
    f2 = solve_inverse(g2, where="F2(omega2)")
    residual = float(np.linalg.norm(f2 - omega2 + z - omega1, 2))
    consistency = max(float(np.linalg.norm(f1 + z - omega1 - omega2, 2)), residual)
    if state is not None:
        state[key] = omega1
        state["sub_iterations"] = state.get("sub_iterations", 0) + info.iterations
    return SubordinationState(omega1, omega2, g1, residual, consistency, info.iterations)


class ConvolvedEvaluator:
    """Cauchy transform of ``Y1 + Y2`` for free ``Y1``, ``Y2``."""

    def __init__(self, left, right, tol=SUB_TOL, maxiter=MAXITER, anderson=ANDERSON_DEPTH):
        if left.dim != right.dim:
            raise DimensionError("summand evaluators act on different sizes")
        self.left = left
        self.right = right
        self.dim = left.dim
        self.tol = tol
        self.maxiter = maxiter
        self.anderson = anderson

    def solve(self, z, state=None):
        return subordinate(self.left, self.right, z, state, tol=self.tol, maxiter=self.maxiter,
                           anderson=self.anderson)

    def __call__(self, z, state=None):
        return self.solve(z, state).G


class PencilEvaluator:
    """``G(z) = G_fold(z - b0)`` for the pencil ``b0 + sum_k c_k (x) X_k``."""

    def __init__(self, b0, inner):
        self.b0 = as_matrix(b0, square=True)
        self.inner = inner
        self.dim = self.b0.shape[0]
        if inner is not None and inner.dim != self.dim:
            raise DimensionError("b0 and summands have different sizes")

    def __call__(self, z, state=None):
        z = as_matrix(z, square=True)
        if self.inner is None:
            return ConstantEvaluator(self.b0)(z)
        return self.inner(z - amplify(self.b0, z.shape[0]), state)


def _merge_semicirculars(summands):
    out, merged = [], None
    for s in summands:
        if isinstance(s, SemicircularEvaluator):
            if merged is None:
                merged = len(out)
                out.append(s)
            else:
                out[merged] = SemicircularEvaluator(out[merged].eta + s.eta)
        else:
            out.append(s)
    return out


def convolve_pencil(b0, summands, merge_semicircular=True):
    """Evaluator of ``b0 + sum`` of free summands by a left fold of subordination.

    Semicircular summands are closed under free convolution (their
    covariances add), so by default they are merged into one evaluator
    before folding.
    """
    summands = list(summands)
    if not summands:
        raise ContractError("convolve_pencil needs at least one summand")
    dims = {s.dim for s in summands}
    if len(dims) != 1:
        raise DimensionError("summand evaluators act on different sizes")
    if merge_semicircular:
        summands = _merge_semicirculars(summands)
    acc = summands[0]
    for s in summands[1:]:
        acc = ConvolvedEvaluator(acc, s)
    return PencilEvaluator(b0, acc)


def evaluator_for_pencil(pencil, specs, merge_semicircular=True):
    """Evaluator for ``pencil`` with ``X_k`` distributed as ``specs[k-1]``.

    Variables whose coefficient vanishes are skipped; a pencil without any
    variable part gives the constant evaluator.
    """
    if len(specs) < pencil.num_vars:
        raise ContractError(f"need {pencil.num_vars} variable specs, got {len(specs)}")
    summands = []
    for k in range(1, pencil.num_vars + 1):
        c = pencil.coefficient(k)
        if np.any(c):
            summands.append(summand_evaluator(c, specs[k - 1]))
    if not summands:
        return PencilEvaluator(pencil.b0, None)
    return convolve_pencil(pencil.b0, summands, merge_semicircular=merge_semicircular)
