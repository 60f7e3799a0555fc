"""Operator-valued Cauchy transforms of the building blocks of a pencil.

Every evaluator maps a point ``z`` of the matrix upper half-plane to
``G(z) = E[(z - Y)^{-1}]`` in the lower half-plane.  Evaluators are fully
matricial: an evaluator built on ``n x n`` coefficients accepts any
``mn x mn`` argument and then acts as the amplification ``id_m (x) G``, with
coefficients entering as ``kron(1_m, c)``.

Fixed-point solves may be warm-started through a caller-owned ``state``
dictionary; evaluators themselves are immutable.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Tuple

import numpy as np

from ._backend import kernels
from .errors import ContractError, ConvergenceError, DimensionError, SingularMatrixError
from .freeness_oracle import CovarianceMap
from .matalg import as_matrix, imaginary_part, operator_norm, solve_inverse

__all__ = [
    "Atomic",
    "Semicircular",
    "spec_from_dict",
    "cauchy_constant",
    "cauchy_atomic",
    "hrs_fixed_point",
    "damped_iterate",
    "hrs_residual",
    "FixedPointInfo",
    "ConstantEvaluator",
    "AtomicEvaluator",
    "SemicircularEvaluator",
    "summand_evaluator",
    "amplify",
]

MAXITER = 100_000
HRS_TOL = 1e-12
DAMP_WINDOW = 50


@dataclass(frozen=True)
class Atomic:
    """Finitely supported distribution ``sum_k weights[k] * delta_{atoms[k]}``."""

    weights: Tuple[float, ...]
    atoms: Tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        a = tuple(float(x) for x in self.atoms)
        if len(w) != len(a) or not w:
            raise ContractError("atomic spec needs matching, non-empty weights and atoms")
        if any(x <= 0 for x in w):
            raise ContractError("atomic weights must be positive")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ContractError(f"atomic weights sum to {sum(w)!r}, not 1")
        if any(a[i] >= a[i + 1] for i in range(len(a) - 1)):
            raise ContractError("atoms must be strictly increasing")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "atoms", a)

    @classmethod
    def from_pairs(cls, pairs):
        """Build from ``[(weight, atom), ...]`` in any order."""
        pairs = sorted(((float(w), float(t)) for w, t in pairs), key=lambda p: p[1])
        return cls(tuple(w for w, _ in pairs), tuple(t for _, t in pairs))

    def moment(self, k):
        return float(sum(w * t**k for w, t in zip(self.weights, self.atoms)))

    @property
    def support_radius(self):
        return max(abs(t) for t in self.atoms)

    def cauchy(self, z):
        z = np.asarray(z, dtype=complex)
        return sum(w / (z - t) for w, t in zip(self.weights, self.atoms))


@dataclass(frozen=True)
class Semicircular:
    """Centred semicircle law of the given variance."""

    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ContractError("semicircular variance must be positive")

    def moment(self, k):
        if k % 2:
            return 0.0
        m = k // 2
        return float(self.variance**m * (comb(2 * m, m) // (m + 1)))

    @property
    def support_radius(self):
        return 2.0 * float(np.sqrt(self.variance))

    def cauchy(self, z):
        """Scalar closed form ``(z - sqrt(z^2 - 4 s)) / (2 s)`` on the correct branch."""
        z = np.asarray(z, dtype=complex)
        s = self.variance
        root = np.sqrt(z - 2 * np.sqrt(s)) * np.sqrt(z + 2 * np.sqrt(s))
        return (z - root) / (2 * s)


def spec_from_dict(d):
    """Parse ``{"kind": "atomic", "atoms": [[w, t], ...]}`` or ``{"kind": "semicircular", "variance": s}``."""
    kind = str(d.get("kind", "")).lower()
    if kind == "atomic":
        return Atomic.from_pairs(d["atoms"])
    if kind == "semicircular":
        return Semicircular(float(d.get("variance", 1.0)))
    raise ContractError(f"unknown variable kind {d.get('kind')!r}")


def amplify(c, size):
    """``kron(1_m, c)`` sized to act on ``size x size`` arguments."""
    n = c.shape[0]
    if size % n:
        raise DimensionError(f"argument size {size} is not a multiple of {n}")
    m = size // n
    return c if m == 1 else np.kron(np.eye(m), c)


def cauchy_constant(b0, z):
    """``(z - b0)^{-1}``, the Cauchy transform of the constant ``b0``."""
    z = as_matrix(z, square=True)
    b0 = amplify(as_matrix(b0, square=True), z.shape[0])
    return solve_inverse(z - b0, where="cauchy_constant")


def cauchy_atomic(c, mu, z):
    """``sum_k w_k (z - t_k c)^{-1}`` for the atomic law ``mu`` lifted by ``c``."""
    z = as_matrix(z, square=True)
    c = amplify(as_matrix(c, square=True), z.shape[0])
    status, g = kernels.atomic_cauchy(c, np.asarray(mu.weights), np.asarray(mu.atoms), z)
    if status:
        raise SingularMatrixError(0.0, where="cauchy_atomic")
    return g


@dataclass
class FixedPointInfo:
    iterations: int = 0
    defect: float = 0.0
    residual: float = 0.0
    damped: bool = False


def _default_w0(z):
    n = z.shape[0]
    r = operator_norm(solve_inverse(imaginary_part(z), where="Im z"))
    return -0.5j * r * np.eye(n)


def _eta_payload(eta, size):
    amp = eta.amplified(size // eta.dim)
    if amp.kind == "list":
        return "list", np.asarray(amp.data, dtype=complex)
    return "action", amp.data


def hrs_fixed_point(eta, z, w0=None, *, tol=HRS_TOL, maxiter=MAXITER, alpha=1.0, auto_damp=True,
                    info=None):
    """Solve ``z w = 1 + eta(w) w`` for ``w`` in the lower half-plane.

    Iterates ``w <- (1 - a) w + a (z - eta(w))^{-1}`` starting from ``w0``
    (default ``-i ||(Im z)^{-1}|| / 2``).  Plain iteration switches to
    ``a = 1/2`` when the step length shrinks by less than 1% over 50 steps.

    Parameters
    ----------
    eta : CovarianceMap
    z : ndarray
        Point of the strict upper half-plane; its size may be a multiple of
        ``eta.dim`` (amplified solve).
    info : FixedPointInfo, optional
        Filled with iteration statistics.

    Raises
    ------
    ConvergenceError
        If the iteration cap is reached.
    """
    z = as_matrix(z, square=True)
    if z.shape[0] % eta.dim:
        raise DimensionError("argument size is not a multiple of the covariance dimension")
    if w0 is None:
        w0 = _default_w0(z)
    kind, payload = _eta_payload(eta, z.shape[0])
    status, w, its, defect, damped = kernels.hrs_solve(z, kind, payload, np.asarray(w0, dtype=complex),
                                                       float(tol), int(maxiter), float(alpha), bool(auto_damp))
    if info is not None:
        info.iterations += int(its)
        info.defect = float(defect)
        info.damped = info.damped or bool(damped)
    if status == 1:
        raise SingularMatrixError(0.0, where="hrs_fixed_point")
    if status == 2:
        raise ConvergenceError("hrs_fixed_point did not converge", defect, its)
    return w


def hrs_residual(eta, z, w):
    """``||z w - 1 - eta(w) w||``."""
    amp = eta.amplified(z.shape[0] // eta.dim)
    return float(np.linalg.norm(z @ w - np.eye(z.shape[0]) - amp(w) @ w, 2))


def damped_iterate(F, w0, alpha=0.5, *, tol=1e-12, maxiter=MAXITER, auto_damp=False, anderson=0, domain=None,
                   info=None, what="iteration"):
    """Fixed point of ``F`` by ``w <- (1 - alpha) w + alpha F(w)``.

    Stops when ``alpha ||F(w) - w|| < tol * max(1, ||w||)``.  With
    ``auto_damp`` and ``alpha = 1`` the step switches to ``1/2`` once the
    step length shrinks by less than 1% over 50 iterations.

    ``anderson = m > 0`` mixes the last ``m`` steps (Anderson acceleration);
    an extrapolated point rejected by ``domain`` falls back to the damped
    step and clears the history, and mixing is switched off for good once
    the step length has not reached a new minimum for 50 iterations.  The
    stopping rule is then the plain ``||F(w) - w|| < tol * max(1, ||w||)``.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    w = np.asarray(w0, dtype=complex)
    ref = -1.0
    trace = []
    defect = float("inf")
    xs, gs = [], []
    best, best_it = float("inf"), 0
    for it in range(1, int(maxiter) + 1):
        f = F(w)
        step = f - w
        defect = float(np.linalg.norm(step))
        wn = float(np.linalg.norm(w))
        test = defect if anderson else alpha * defect
        if test < tol * max(1.0, wn):
            if info is not None:
                info.iterations += it
                info.defect = defect
                info.damped = info.damped or alpha < 1
            return w + alpha * step
        nxt = w + alpha * step
        if defect < best:
            best, best_it = defect, it
        elif anderson and it - best_it > DAMP_WINDOW:
            anderson = 0
        if anderson:
            xs.append(w.ravel())
            gs.append(step.ravel())
            if len(xs) > anderson + 1:
                xs.pop(0)
                gs.pop(0)
            if len(xs) > 1:
                dg = np.diff(np.array(gs), axis=0).T
                dx = np.diff(np.array(xs), axis=0).T
                gamma = np.linalg.lstsq(dg, step.ravel(), rcond=None)[0]
                cand = (nxt.ravel() - (dx + alpha * dg) @ gamma).reshape(w.shape)
                if np.all(np.isfinite(cand)) and (domain is None or domain(cand)):
                    nxt = cand
                else:
                    xs, gs = [], []
        w = nxt
        if it % DAMP_WINDOW == 0:
            trace.append(defect)
            if auto_damp and alpha >= 1.0 and ref >= 0 and defect > 0.99 * ref:
                alpha = 0.5
            ref = defect
    raise ConvergenceError(f"{what} did not converge", defect, maxiter, trace[-20:])


class ConstantEvaluator:
    """Cauchy transform of a constant ``b0``: ``z -> (z - b0)^{-1}``."""

    def __init__(self, b0):
        self.b0 = as_matrix(b0, square=True)
        self.dim = self.b0.shape[0]

    def __call__(self, z, state=None):
        return cauchy_constant(self.b0, z)

    def moment(self, k):
        return np.linalg.matrix_power(self.b0, k)


class AtomicEvaluator:
    """Cauchy transform of ``c (x) X`` for a finitely supported scalar law."""

    def __init__(self, c, mu: Atomic):
        self.c = as_matrix(c, square=True)
        self.mu = mu
        self.dim = self.c.shape[0]

    def __call__(self, z, state=None):
        return cauchy_atomic(self.c, self.mu, z)

    @property
    def norm_bound(self):
        return operator_norm(self.c) * self.mu.support_radius


class SemicircularEvaluator:
    """Cauchy transform of a matrix-valued semicircular element of covariance ``eta``."""

    def __init__(self, eta: CovarianceMap, tol=HRS_TOL, maxiter=MAXITER):
        self.eta = eta
        self.dim = eta.dim
        self.tol = tol
        self.maxiter = maxiter

    def __call__(self, z, state=None):
        z = as_matrix(z, square=True)
        key = (id(self), z.shape[0])
        w0 = None
        if state is not None:
            prev = state.get(key)
            if prev is not None:
                w0 = prev
        info = FixedPointInfo()
        w = hrs_fixed_point(self.eta, z, w0, tol=self.tol, maxiter=self.maxiter, info=info)
        if state is not None:
            state[key] = w
            state["hrs_iterations"] = state.get("hrs_iterations", 0) + info.iterations
        return w

    @property
    def norm_bound(self):
        return 2.0 * np.sqrt(self.eta.norm())


def summand_evaluator(c, spec):
    """Evaluator for ``c (x) X`` with ``X`` distributed according to ``spec``."""
    c = as_matrix(c, square=True)
    if isinstance(spec, Atomic):
        return AtomicEvaluator(c, spec)
    if isinstance(spec, Semicircular):
        return SemicircularEvaluator(CovarianceMap.explicit(np.sqrt(spec.variance) * c))
    raise ContractError(f"unsupported variable spec {spec!r}")
