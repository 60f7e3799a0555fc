"""Scalar Cauchy transforms from pencil evaluators and Stieltjes inversion.

For a selfadjoint pencil whose (1,1) Schur complement is ``p``, the scalar
Cauchy transform of ``p`` is approximated by the (1,1) entry of the pencil's
operator-valued Cauchy transform at ``diag(z, i*eps, ..., i*eps)``.  The
density is then ``rho(t) = -Im G(t + i*eps_z) / pi``.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cauchy import SemicircularEvaluator, amplify, hrs_residual
from .convolve import ConvolvedEvaluator, PencilEvaluator
from .errors import ConvergenceError, SingularMatrixError
from .matalg import operator_norm

__all__ = [
    "SpectralDensity",
    "lambda_eps",
    "scalar_cauchy",
    "solve_point",
    "invert_stieltjes",
    "moments_from_density",
    "contour_moments",
    "contour_scalar_moments",
    "pencil_norm_bound",
]

EPS_Z = 1e-3
EPS_PENCIL = 1e-7
NEGATIVE_CHECK = -1e-10
NEGATIVE_WARN = -1e-8


@dataclass
class SpectralDensity:
    """Density samples ``values`` on ``grid``; failed points hold ``nan``."""

    grid: np.ndarray
    values: np.ndarray
    epsilon: float
    eps_pencil: float = EPS_PENCIL
    status: list = field(default_factory=list)
    iterations: np.ndarray = None
    residuals: np.ndarray = None
    warm_starts: int = 0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if not self.status:
            self.status = ["ok"] * len(self.grid)
        if self.iterations is None:
            self.iterations = np.zeros(len(self.grid), dtype=int)
        if self.residuals is None:
            self.residuals = np.zeros(len(self.grid))

    @property
    def converged(self):
        return all(s == "ok" for s in self.status)

    @property
    def mass(self):
        ok = np.isfinite(self.values)
        return float(np.trapezoid(self.values[ok], self.grid[ok]))

    def cdf(self, t):
        """Trapezoid CDF normalised by the captured mass, interpolated at ``t``."""
        ok = np.isfinite(self.values)
        g, v = self.grid[ok], self.values[ok]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(g))])
        if cum[-1] > 0:
            cum = cum / cum[-1]
        return np.interp(t, g, cum, left=0.0, right=1.0)

    def rows(self):
        for t, r, s, it, res in zip(self.grid, self.values, self.status, self.iterations, self.residuals):
            yield t, r, s, int(it), float(res)


def lambda_eps(z, size, eps=EPS_PENCIL):
    """``diag(z, i eps, ..., i eps)`` of the given size."""
    d = np.full(size, 1j * eps, dtype=complex)
    d[0] = z
    return np.diag(d)


def _counters(state):
    return state.get("sub_iterations", 0) + state.get("hrs_iterations", 0)


def solve_point(evaluator, b, state):
    """``(G(b), iterations, residual)`` for one operator-valued argument."""
    before = _counters(state)
    inner, arg = evaluator, b
    if isinstance(evaluator, PencilEvaluator) and evaluator.inner is not None:
        inner, arg = evaluator.inner, b - amplify(evaluator.b0, b.shape[0])
    if isinstance(inner, ConvolvedEvaluator):
        st = inner.solve(arg, state)
        G, residual = st.G, st.residual
    elif isinstance(inner, SemicircularEvaluator):
        G = inner(arg, state)
        residual = hrs_residual(inner.eta, arg, G)
    else:
        G, residual = evaluator(b, state), 0.0
    return G, _counters(state) - before, residual


def scalar_cauchy(evaluator, z, eps=EPS_PENCIL, state=None):
    """``[G(diag(z, i eps, ...))]_{11}``."""
    if not complex(z).imag > 0:
        raise ValueError("z must lie in the upper half-plane")
    state = {} if state is None else state
    G = evaluator(lambda_eps(z, evaluator.dim, eps), state)
    return complex(G[0, 0])


def _sweep(evaluator, ts, eps_z, eps_pencil, functional):
    state = {}
    out = []
    n = evaluator.dim
    for t in ts:
        z = t + 1j * eps_z
        b = z * np.eye(n) if functional == "trace" else lambda_eps(z, n, eps_pencil)
        warm = any(not isinstance(k, str) for k in state)
        try:
            G, its, res = solve_point(evaluator, b, state)
            g = np.trace(G) / n if functional == "trace" else G[0, 0]
            out.append((-g.imag / np.pi, "ok", its, res, warm))
        except ConvergenceError as exc:
            out.append((np.nan, "nonconverged", exc.iterations, exc.residual, warm))
            state = {}
        except SingularMatrixError:
            out.append((np.nan, "singular", 0, np.nan, warm))
            state = {}
    return out


def _chunks(n, k):
    k = max(1, min(int(k), n))
    edges = np.linspace(0, n, k + 1).astype(int)
    return [(edges[i], edges[i + 1]) for i in range(k)]


def invert_stieltjes(evaluator, t_grid, eps=EPS_Z, eps_pencil=EPS_PENCIL, *, workers=1, richardson=False,
                     functional="corner"):
    """Density ``-Im g(t + i eps) / pi`` on ``t_grid``.

    Parameters
    ----------
    evaluator : callable
        Operator-valued Cauchy transform of a selfadjoint pencil.
    t_grid : array_like
        Increasing real grid.
    eps, eps_pencil : float
        Height above the real axis and the filler of ``Lambda_eps``.
    workers : int
        Number of threads; each sweeps a contiguous chunk with its own
        warm-start state.  Output order is grid order.
    richardson : bool
        Replace ``rho_eps`` by ``2 rho_{eps/2} - rho_eps``.
    functional : {"corner", "trace"}
        ``"corner"``: ``g(z) = [G(diag(z, i eps_pencil, ...))]_{11}``, the
        distribution of the Schur complement.  ``"trace"``: ``g(z) =
        tr G(z 1)``, the distribution of the block matrix itself.
    """
    if functional not in ("corner", "trace"):
        raise ValueError("functional must be 'corner' or 'trace'")
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or np.any(np.diff(ts) <= 0):
        raise ValueError("grid must be strictly increasing")
    if not eps > 0 or not eps_pencil > 0:
        raise ValueError("eps and eps_pencil must be positive")

    def run(e):
        parts = _chunks(len(ts), workers)
        if len(parts) == 1:
            return _sweep(evaluator, ts, e, eps_pencil, functional)
        with ThreadPoolExecutor(max_workers=len(parts)) as pool:
            futs = [pool.submit(_sweep, evaluator, ts[a:b], e, eps_pencil, functional) for a, b in parts]
            return [r for f in futs for r in f.result()]

    res = run(eps)
    rho = np.array([r[0] for r in res])
    status = [r[1] for r in res]
    its = np.array([r[2] for r in res])
    resid = np.array([r[3] for r in res], dtype=float)
    warm = sum(r[4] for r in res)
    if richardson:
        half = run(eps / 2)
        rho = 2 * np.array([r[0] for r in half]) - rho
        status = [a if a != "ok" else b[1] for a, b in zip(status, half)]
        its = its + np.array([r[2] for r in half])
    finite = np.isfinite(rho)
    if not richardson and np.any(rho[finite] < NEGATIVE_WARN):
        warnings.warn(f"density dipped to {rho[finite].min():.3e}; solver tolerance breached", RuntimeWarning)
    rho = np.where(finite, np.maximum(rho, 0.0), np.nan)
    return SpectralDensity(ts, rho, eps, eps_pencil, status, its, resid, warm)


def moments_from_density(d, max_order):
    """Trapezoid moments ``int t^j rho(t) dt`` for ``j = 0..max_order``."""
    ok = np.isfinite(d.values)
    g, v = d.grid[ok], d.values[ok]
    return [float(np.trapezoid(g**j * v, g)) for j in range(max_order + 1)]


def _circle(radius, points):
    theta = np.pi * (np.arange(points) + 0.5) / points
    return radius * np.exp(1j * theta)


def contour_moments(evaluator, max_order, radius, points=64, state=None):
    """Operator-valued moments ``E[P^k]`` from ``G(zeta 1)`` on a circle.

    Uses the trapezoid rule for ``(1/2 pi i) \\oint zeta^k G(zeta) d zeta``
    with ``G(conj zeta) = G(zeta)^*``; ``radius`` must exceed the spectral
    radius of the pencil.
    """
    state = {} if state is None else state
    n = evaluator.dim
    acc = [np.zeros((n, n), dtype=complex) for _ in range(max_order + 1)]
    for zeta in _circle(radius, points):
        G = evaluator(zeta * np.eye(n), state)
        for k in range(max_order + 1):
            acc[k] += zeta ** (k + 1) * G
    return [(a + a.conj().T) / (2 * points) for a in acc]


def contour_scalar_moments(evaluator, max_order, radius, points=64, eps_pencil=EPS_PENCIL, state=None, *,
                           center=0.0, exponents=None, extrapolate=True):
    """Scalar moments of the Schur complement from ``scalar_cauchy`` on a circle.

    Returns ``int t^j d mu(t)`` for ``j`` in ``exponents`` (default
    ``0..max_order``) by the trapezoid rule on the circle of the given
    ``center`` and ``radius``, which must enclose the support.  Negative
    exponents are allowed when the circle also excludes 0.  With
    ``extrapolate`` the ``O(eps_pencil)`` bias of the corner entry is
    removed by combining ``eps_pencil`` and ``eps_pencil / 2``.
    """
    state = {} if state is None else state
    exps = np.arange(max_order + 1) if exponents is None else np.asarray(list(exponents))
    if np.any(exps < 0) and abs(center) <= radius:
        raise ValueError("negative exponents need a contour excluding 0")
    acc = np.zeros(len(exps), dtype=complex)
    for zeta in center + _circle(radius, points):
        g = scalar_cauchy(evaluator, zeta, eps_pencil, state)
        if extrapolate:
            g = 2 * scalar_cauchy(evaluator, zeta, eps_pencil / 2, state) - g
        acc += zeta ** exps.astype(float) * (zeta - center) * g
    return list(acc.real / points)


def pencil_norm_bound(pencil, specs):
    """``||b0|| + sum_k ||b_k|| r_k`` with ``r_k`` the support radius of ``X_k``."""
    return operator_norm(pencil.b0) + sum(
        operator_norm(pencil.coefficient(k)) * specs[k - 1].support_radius for k in range(1, pencil.num_vars + 1)
    )
