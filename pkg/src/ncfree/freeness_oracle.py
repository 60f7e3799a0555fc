"""Exact combinatorics of non-crossing partitions and operator-valued moments.

Elements of an operator-valued probability space are handled in the form
``X_label * b`` where ``b`` is a matrix in the base algebra.  A list of such
elements ``[(l1, b1), ..., (ln, bn)]`` stands for the product
``X_l1 b1 X_l2 b2 ... X_ln bn``.  Everything here works on numpy arrays of
any dtype that supports ``@``; object arrays of :class:`fractions.Fraction`
give exact rational results.

The nested maps ``T_pi`` (moments ``E_pi`` or cumulants ``kappa_pi``) are
evaluated by repeatedly removing the leftmost interval block of ``pi``.  An
interval block standing after position ``p`` is absorbed into the matrix
``b_p`` to its left; an interval block at the very start multiplies the
remaining word from the left.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np
import scipy.linalg

from .errors import CapacityError, ContractError, DimensionError

__all__ = [
    "NCPartition",
    "enumerate_nc",
    "catalan",
    "CovarianceMap",
    "nested_apply",
    "eta_pi",
    "semicircular_moment",
    "free_cumulant",
    "scalar_free_cumulants",
    "scalar_mixed_moment",
    "scalar_moments_from_cumulants",
    "polynomial_moments",
    "MomentSource",
    "ScalarAmplifiedSource",
    "SemicircularSource",
    "FunctionSource",
    "SumSource",
    "mixed_moment_free",
    "moment_from_cumulants",
    "pencil_moments",
]

MAX_PAIRING_N = 16
MAX_PARTITION_N = 10
MAX_CUMULANT_N = 8
MAX_SEMICIRCULAR_K = 12
CHOI_TOL = 1e-10


def catalan(m):
    return comb(2 * m, m) // (m + 1)


@dataclass(frozen=True)
class NCPartition:
    """Non-crossing partition of ``{1, ..., n}``; blocks are 1-based tuples."""

    n: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        object.__setattr__(self, "blocks", blocks)
        seen = sorted(i for b in blocks for i in b)
        if seen != list(range(1, self.n + 1)):
            raise ValueError(f"blocks {blocks} do not partition 1..{self.n}")
        owner = {i: k for k, b in enumerate(blocks) for i in b}
        for a, b, c, d in combinations(range(1, self.n + 1), 4):
            if owner[a] == owner[c] != owner[b] == owner[d]:
                raise ValueError(f"blocks {blocks} cross")

    @classmethod
    def _trusted(cls, n, blocks):
        obj = object.__new__(cls)
        object.__setattr__(obj, "n", n)
        object.__setattr__(obj, "blocks", blocks)
        return obj

    @property
    def is_pairing(self):
        return all(len(b) == 2 for b in self.blocks)

    def refines(self, labels):
        """True if every block is constant on ``labels`` (a length-``n`` sequence)."""
        return all(len({labels[i - 1] for i in b}) == 1 for b in self.blocks)

    def __str__(self):
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


@lru_cache(maxsize=None)
def _nc_blocks(n, pairings):
    """All non-crossing partitions of ``range(n)`` as tuples of 0-based blocks."""
    if n == 0:
        return ((),)
    if pairings and n % 2:
        return ()
    out = []
    rest = range(1, n)
    sizes = [1] if pairings else range(0, n)
    for k in sizes:
        for others in combinations(rest, k):
            block = (0,) + others
            # gaps between consecutive members, plus the tail after the last one
            bounds = list(block) + [n]
            gaps = [(bounds[i] + 1, bounds[i + 1]) for i in range(len(block))]
            parts = [((),)]
            for lo, hi in gaps:
                sub = _nc_blocks(hi - lo, pairings)
                if not sub:
                    parts = []
                    break
                shifted = tuple(tuple(tuple(x + lo for x in b) for b in p) for p in sub)
                parts.append(shifted)
            if not parts:
                continue
            combos = [()]
            for choice in parts:
                combos = [c + p for c in combos for p in choice]
            out.extend((block,) + c for c in combos)
    return tuple(out)


@lru_cache(maxsize=None)
def enumerate_nc(n, pairings_only=False):
    """All non-crossing partitions (or pairings) of ``{1, ..., n}``.

    Raises
    ------
    CapacityError
        If ``n`` exceeds 16 for pairings or 10 for general partitions.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    cap = MAX_PAIRING_N if pairings_only else MAX_PARTITION_N
    if n > cap:
        raise CapacityError(f"enumerate_nc capped at n <= {cap}, got {n}")
    return tuple(
        NCPartition._trusted(n, tuple(sorted(tuple(i + 1 for i in b) for b in p)))
        for p in _nc_blocks(n, bool(pairings_only))
    )


def _identity(n, like=None):
    if like is not None and like.dtype == object:
        eye = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                eye[i, j] = Fraction(int(i == j))
        return eye
    return np.eye(n, dtype=complex)


def _zeros(n, like=None):
    if like is not None and like.dtype == object:
        return _identity(n, like) * 0
    return np.zeros((n, n), dtype=complex)


class CovarianceMap:
    """Completely positive map ``eta`` on ``n x n`` matrices.

    Parameters
    ----------
    dim : int
        Matrix size ``n``.
    kind : {"list", "action"}
        ``"list"``: ``data`` holds ``b_1, ..., b_d`` and ``eta(b) = sum b_j b b_j``.
        ``"action"``: ``data`` is an ``n^2 x n^2`` matrix acting on the
        row-major vectorisation of ``b``.
    data : ndarray
    """

    def __init__(self, dim, kind, data, check=True):
        if kind not in ("list", "action"):
            raise ValueError("kind must be 'list' or 'action'")
        self.dim = int(dim)
        self.kind = kind
        arr = np.asarray(data)
        if arr.dtype != object:
            arr = arr.astype(complex)
        if kind == "list":
            if arr.ndim == 2:
                arr = arr[None]
            if arr.ndim != 3 or arr.shape[1:] != (self.dim, self.dim):
                raise DimensionError(f"covariance list must have shape (d, {dim}, {dim})")
        else:
            if arr.shape != (self.dim**2, self.dim**2):
                raise DimensionError(f"covariance action must be {dim**2} x {dim**2}")
            if check:
                self._check_cp(arr)
        self.data = arr
        self._levels = {}

    @classmethod
    def explicit(cls, bs):
        bs = np.asarray(bs) if not isinstance(bs, np.ndarray) else bs
        if bs.ndim == 2:
            bs = bs[None]
        return cls(bs.shape[1], "list", bs)

    @classmethod
    def from_action(cls, L, check=True):
        L = np.asarray(L, dtype=complex)
        n = int(round(np.sqrt(L.shape[0])))
        return cls(n, "action", L, check=check)

    @classmethod
    def from_function(cls, fn, dim, check=True):
        """Tabulate a linear map given as a Python function on matrices."""
        n = int(dim)
        L = np.zeros((n * n, n * n), dtype=complex)
        for k in range(n * n):
            e = np.zeros(n * n, dtype=complex)
            e[k] = 1.0
            L[:, k] = np.asarray(fn(e.reshape(n, n)), dtype=complex).reshape(-1)
        return cls(n, "action", L, check=check)

    @classmethod
    def scalar(cls, variance=1, dim=1):
        """``eta(b) = variance * b``; exact when ``variance`` is a rational square."""
        if isinstance(variance, (int, Fraction)):
            root = _rational_sqrt(Fraction(variance))
            if root is not None:
                return cls(dim, "list", (_identity(dim, np.empty(0, dtype=object)) * root)[None])
        return cls(dim, "list", (np.sqrt(float(variance)) * np.eye(dim))[None])

    def _check_cp(self, L):
        choi = self.choi_matrix(L)
        ev = np.linalg.eigvalsh((choi + choi.conj().T) / 2)
        scale = max(1.0, float(np.abs(ev).max()))
        if ev[0] < -CHOI_TOL * scale:
            raise ContractError(f"covariance map is not completely positive (Choi eigenvalue {ev[0]:.3e})")
        herm = np.abs(choi - choi.conj().T).max()
        if herm > CHOI_TOL * scale:
            raise ContractError("covariance map does not preserve adjoints")

    def choi_matrix(self, L=None):
        """``sum_ij E_ij (x) eta(E_ij)``."""
        n = self.dim
        L = self.action_matrix() if L is None else L
        choi = np.zeros((n * n, n * n), dtype=complex)
        for i in range(n):
            for j in range(n):
                img = L[:, i * n + j].reshape(n, n)
                choi[i * n:(i + 1) * n, j * n:(j + 1) * n] = img
        return choi

    def __call__(self, b):
        if self.kind == "list":
            out = None
            for bj in self.data:
                t = bj @ b @ bj
                out = t if out is None else out + t
            return out
        n = self.dim
        b = np.asarray(b, dtype=complex)
        return (self.data @ b.reshape(-1)).reshape(n, n)

    def action_matrix(self):
        if self.kind == "action":
            return self.data
        n = self.dim
        L = np.zeros((n * n, n * n), dtype=complex)
        for bj in np.asarray(self.data, dtype=complex):
            L += np.kron(bj, bj.T)
        return L

    def norm(self):
        """Norm estimate: operator norm of the action, or ``sum ||b_j||^2``."""
        if self.kind == "action":
            return float(scipy.linalg.svdvals(self.data)[0])
        return float(sum(scipy.linalg.svdvals(np.asarray(b, dtype=complex))[0] ** 2 for b in self.data))

    def at_identity(self):
        return self(_identity(self.dim, self.data if self.data.dtype == object else None))

    def is_scalar_reducing(self, tol=1e-12):
        """True if ``eta(1)`` is a multiple of the identity."""
        e = np.asarray(self.at_identity(), dtype=complex)
        c = np.trace(e) / self.dim
        return bool(np.abs(e - c * np.eye(self.dim)).max() <= tol * max(1.0, abs(c)))

    def amplified(self, m):
        """The map ``id_m (x) eta`` acting blockwise on ``mn x mn`` matrices."""
        m = int(m)
        if m == 1:
            return self
        if m in self._levels:
            return self._levels[m]
        if self.kind == "list":
            eye = np.eye(m, dtype=complex)
            amp = CovarianceMap(m * self.dim, "list", np.array([np.kron(eye, np.asarray(b, complex)) for b in self.data]))
        else:
            n = self.dim
            N = m * n
            L = self.data
            big = np.zeros((N * N, N * N), dtype=complex)
            # entry (i*n + a, j*n + c) lives in block (i, j) at position (a, c)
            for i in range(m):
                for j in range(m):
                    rows = [(i * n + a) * N + (j * n + c) for a in range(n) for c in range(n)]
                    big[np.ix_(rows, rows)] = L
            amp = CovarianceMap(N, "action", big, check=False)
        self._levels[m] = amp
        return amp

    def __add__(self, other):
        if other.dim != self.dim:
            raise DimensionError("covariance maps of different sizes")
        if self.kind == other.kind == "list":
            return CovarianceMap(self.dim, "list", np.concatenate([self.data, other.data]))
        return CovarianceMap(self.dim, "action", self.action_matrix() + other.action_matrix(), check=False)


def _rational_sqrt(q):
    from math import isqrt

    if q < 0:
        return None
    rn, rd = isqrt(q.numerator), isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        return Fraction(rn, rd)
    return None


def nested_apply(pi, elems, block_fn):
    """Evaluate the nested map ``T_pi`` on ``elems``.

    ``block_fn`` receives the sub-list of ``(label, b)`` pairs of one interval
    block and returns a base-algebra matrix.
    """
    if pi.n != len(elems):
        raise DimensionError(f"partition of {pi.n} applied to {len(elems)} elements")
    labels = [e[0] for e in elems]
    bvals = [e[1] for e in elems]
    live = list(range(pi.n))
    blocks = [[i - 1 for i in b] for b in pi.blocks]
    left = None
    while blocks:
        pos = {p: k for k, p in enumerate(live)}
        chosen = None
        for blk in sorted(blocks, key=lambda b: pos[b[0]]):
            if pos[blk[-1]] - pos[blk[0]] == len(blk) - 1:
                chosen = blk
                break
        start = pos[chosen[0]]
        val = block_fn([(labels[p], bvals[p]) for p in chosen])
        if start == 0:
            left = val if left is None else left @ val
        else:
            prev = live[start - 1]
            bvals[prev] = bvals[prev] @ val
        blocks.remove(chosen)
        members = set(chosen)
        live = [p for p in live if p not in members]
    return left


def eta_pi(pi, eta, b):
    """``eta_pi(b_1, ..., b_{2m-1})`` for a non-crossing pairing ``pi`` of ``2m``."""
    if not pi.is_pairing:
        raise ContractError("eta_pi needs a pairing")
    if len(b) != pi.n - 1:
        raise DimensionError(f"need {pi.n - 1} matrices, got {len(b)}")
    for bi in b:
        if np.shape(bi) != (eta.dim, eta.dim):
            raise DimensionError("argument size does not match the covariance map")
    one = _identity(eta.dim, b[0] if b else eta.data)
    elems = [(0, bi) for bi in b] + [(0, one)]
    return nested_apply(pi, elems, lambda blk: eta(blk[0][1]) @ blk[1][1])


def semicircular_moment(eta, b):
    """``E[S b_1 S b_2 ... b_{k-1} S]`` for the semicircular element of covariance ``eta``."""
    k = len(b) + 1
    if k > MAX_SEMICIRCULAR_K:
        raise CapacityError(f"semicircular_moment capped at k <= {MAX_SEMICIRCULAR_K}")
    like = b[0] if b else (eta.data if eta.data.dtype == object else None)
    if k % 2:
        return _zeros(eta.dim, like)
    total = _zeros(eta.dim, like)
    for pi in enumerate_nc(k, pairings_only=True):
        total = total + eta_pi(pi, eta, list(b))
    return total


def _key(elems):
    return tuple((lab, tuple(np.asarray(b).ravel().tolist())) for lab, b in elems)


def free_cumulant(moment_fn, args, _cache=None):
    """Free cumulant ``kappa_n(a_1, ..., a_n)`` of a moment source.

    ``moment_fn`` maps a list of ``(label, b)`` pairs to
    ``E[X_l1 b1 ... X_ln bn]``.  The cumulant is obtained from
    ``kappa_n = E_n - sum_{pi < 1_n} kappa_pi``.
    """
    n = len(args)
    if n > MAX_CUMULANT_N:
        raise CapacityError(f"free_cumulant capped at n <= {MAX_CUMULANT_N}")
    cache = {} if _cache is None else _cache
    key = _key(args)
    if key in cache:
        return cache[key]
    total = moment_fn(list(args))
    for pi in enumerate_nc(n):
        if len(pi.blocks) == 1:
            continue
        total = total - nested_apply(pi, list(args), lambda sub: free_cumulant(moment_fn, sub, cache))
    cache[key] = total
    return total


def scalar_mixed_moment(kappas, word, _cache=None):
    """``phi(X_w1 ... X_wn)`` for free scalar variables.

    ``kappas[label]`` lists the free cumulants ``kappa_1, kappa_2, ...`` of
    ``X_label``.  Sums over non-crossing partitions are organised by the
    block containing the first letter; the other letters split into
    contiguous gaps whose moments are memoised, so the cost is polynomial in
    the word length.  Cumulants beyond the supplied list are taken as 0.
    """
    cache = {} if _cache is None else _cache
    return _phi(kappas, tuple(word), cache)


def _phi(kappas, w, cache):
    if not w:
        return 1
    key = ("phi", w)
    if key in cache:
        return cache[key]
    ks = kappas[w[0]]
    total = 0
    for s in range(1, min(len(ks), w.count(w[0])) + 1):
        if ks[s - 1] != 0:
            total = total + ks[s - 1] * _chain(kappas, w, s, cache)
    cache[key] = total
    return total


def _chain(kappas, w, s, cache):
    # block of size s starting at w[0] inside w, times the moments of its gaps
    if s == 1:
        return _phi(kappas, w[1:], cache)
    key = ("chain", w, s)
    if key in cache:
        return cache[key]
    total = 0
    for q in range(1, len(w)):
        if w[q] == w[0]:
            total = total + _phi(kappas, w[1:q], cache) * _chain(kappas, w[q:], s - 1, cache)
    cache[key] = total
    return total


def scalar_free_cumulants(moments):
    """Scalar free cumulants ``kappa_1..kappa_K`` from moments ``m_0..m_K``."""
    kappa = []
    for n in range(1, len(moments)):
        kappa.append(0)
        kappa[-1] = moments[n] - scalar_mixed_moment({0: kappa}, (0,) * n)
    return kappa


def scalar_moments_from_cumulants(kappa, max_order):
    """Moments ``m_0..m_max_order`` of a scalar variable with free cumulants ``kappa``."""
    cache = {}
    return [scalar_mixed_moment({0: list(kappa)}, (0,) * k, cache) for k in range(max_order + 1)]


def polynomial_moments(poly, kappas, max_order):
    """``phi(p^k)``, ``k = 0..max_order``, for a polynomial in free variables.

    ``poly`` is an :class:`NCPolynomial` or a list of ``(word, coefficient)``
    pairs (e.g. with :class:`fractions.Fraction` coefficients for exact
    results).  ``kappas[i]`` lists the free cumulants of ``x_i`` (1-based labels).
    """
    terms = list(getattr(poly, "terms", poly))
    cache = {}
    power = {(): 1}
    out = [1]
    for _ in range(max_order):
        nxt = {}
        for w1, c1 in power.items():
            for w2, c2 in terms:
                nxt[w1 + w2] = nxt.get(w1 + w2, 0) + c1 * c2
        power = nxt
        out.append(sum(c * scalar_mixed_moment(kappas, w, cache) for w, c in power.items()))
    return out


class MomentSource:
    """A single random variable viewed through its base-algebra moments."""

    dim = 1

    def moment(self, bs):
        raise NotImplementedError

    def cumulant(self, bs):
        cache = self.__dict__.setdefault("_kcache", {})
        return free_cumulant(lambda e: self.moment([b for _, b in e]), [(0, b) for b in bs], cache)


class FunctionSource(MomentSource):
    """Moments given by a function ``bs -> E[X b1 X b2 ... X bk]``."""

    def __init__(self, fn, dim):
        self.fn = fn
        self.dim = int(dim)

    def moment(self, bs):
        return self.fn(list(bs))


class ScalarAmplifiedSource(MomentSource):
    """``c (x) X`` for a scalar variable ``X`` with the given moments ``m_0, m_1, ...``.

    ``E[(cX) b1 (cX) b2 ... (cX) bk] = m_k * c b1 c b2 ... c bk``.
    """

    def __init__(self, c, moments):
        self.c = c if isinstance(c, np.ndarray) and c.dtype == object else np.asarray(c, dtype=complex)
        self.dim = self.c.shape[0]
        self.moments = list(moments)
        self._kappa = scalar_free_cumulants(self.moments)

    def _word(self, bs):
        out = None
        for b in bs:
            t = self.c @ b
            out = t if out is None else out @ t
        return out

    def moment(self, bs):
        k = len(bs)
        if k >= len(self.moments):
            raise CapacityError(f"only {len(self.moments) - 1} scalar moments supplied")
        return self.moments[k] * self._word(bs)

    def cumulant(self, bs):
        k = len(bs)
        if k > len(self._kappa):
            raise CapacityError(f"only {len(self._kappa)} scalar cumulants available")
        return self._kappa[k - 1] * self._word(bs)


class SemicircularSource(MomentSource):
    """Operator-valued semicircular element of covariance ``eta``."""

    def __init__(self, eta):
        self.eta = eta
        self.dim = eta.dim

    def moment(self, bs):
        bs = list(bs)
        return semicircular_moment(self.eta, bs[:-1]) @ bs[-1]

    def cumulant(self, bs):
        if len(bs) == 2:
            return self.eta(bs[0]) @ bs[1]
        return _zeros(self.dim, bs[0])


class SumSource(MomentSource):
    """``b0 + sum_k Y_k`` for free ``Y_k``: cumulants add, ``b0`` only shifts ``kappa_1``."""

    def __init__(self, b0, parts):
        self.b0 = b0
        self.parts = list(parts)
        self.dim = b0.shape[0]

    def cumulant(self, bs):
        acc = self.b0 @ bs[0] if len(bs) == 1 else _zeros(self.dim, bs[0])
        for part in self.parts:
            acc = acc + part.cumulant(bs)
        return acc

    def moment(self, bs):
        return moment_from_cumulants(self, bs)


def moment_from_cumulants(source, bs):
    """``E[X b1 ... X bk] = sum_{pi in NC(k)} kappa_pi``."""
    k = len(bs)
    elems = [(0, b) for b in bs]
    total = None
    for pi in enumerate_nc(k):
        t = nested_apply(pi, elems, lambda sub: source.cumulant([b for _, b in sub]))
        total = t if total is None else total + t
    return total


def mixed_moment_free(sources, word, bs=None):
    """``E[X_w1 b1 X_w2 b2 ... X_wn bn]`` for free variables.

    Parameters
    ----------
    sources : mapping or sequence
        ``sources[label]`` is a :class:`MomentSource`; different labels are free.
    word : sequence
        Variable labels ``w1, ..., wn``.
    bs : sequence of matrices, optional
        ``b1, ..., bn`` (identity where omitted; a list of length ``n - 1``
        gets a trailing identity).
    """
    word = list(word)
    n = len(word)
    if n == 0:
        raise ValueError("empty word")
    if n > MAX_CUMULANT_N:
        raise CapacityError(f"mixed_moment_free capped at word length {MAX_CUMULANT_N}")
    dim = sources[word[0]].dim
    if bs is None:
        bs = []
    bs = list(bs)
    like = bs[0] if bs else None
    while len(bs) < n:
        bs.append(_identity(dim, like))
    elems = list(zip(word, bs))
    total = _zeros(dim, like)
    for pi in enumerate_nc(n):
        if not pi.refines(word):
            continue
        total = total + nested_apply(pi, elems, lambda sub: sources[sub[0][0]].cumulant([b for _, b in sub]))
    return total


def pencil_moments(b0, summands, max_order):
    """Moments ``E[P^k]``, ``k = 0..max_order``, of ``P = b0 + sum_k c_k (x) X_k``.

    ``summands`` is a list of ``(c_k, source)`` where ``source`` is either a
    :class:`MomentSource` already amplified by ``c_k`` (pass ``c_k=None``) or
    an object with ``moment(k)`` returning scalar moments of ``X_k``.
    """
    if max_order > MAX_CUMULANT_N:
        raise CapacityError(f"pencil_moments capped at order {MAX_CUMULANT_N}")
    b0 = np.asarray(b0, dtype=complex)
    parts = []
    for c, src in summands:
        if c is None:
            parts.append(src)
        else:
            parts.append(ScalarAmplifiedSource(c, [src.moment(k) for k in range(max_order + 1)]))
    total = SumSource(b0, parts)
    one = np.eye(b0.shape[0], dtype=complex)
    out = [one]
    for k in range(1, max_order + 1):
        out.append(total.moment([one] * k))
    return out
