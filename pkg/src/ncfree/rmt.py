"""Random-matrix sampling, eigenvalue histograms and KS distances.

Random streams come from the counter-based Philox generator.  Trial ``t``
of a run with seed ``s`` uses ``SeedSequence([s, t])``, spawned once per
variable, so trials are independent and can run in any order.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from . import ncexpr
from .errors import ContractError, SingularMatrixError
from .linearize import LinearPencil

__all__ = [
    "EnsembleSpec",
    "Histogram",
    "make_rng",
    "sample_gue",
    "sample_haar_unitary",
    "sample",
    "assemble_and_spectrum",
    "ks_distance",
]

KINDS = ("gue", "haar_diagonal", "deterministic")


def make_rng(seed, *keys):
    """Philox generator for the stream ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return make_rng(seed_or_rng)


@dataclass(frozen=True)
class EnsembleSpec:
    """One random (or deterministic) matrix model.

    ``atoms`` lists ``(fraction, value)`` pairs for the diagonal kinds;
    ``scale`` multiplies a GUE sample (standard deviation of the semicircle).
    """

    kind: str
    size: int
    seed: int = 0
    atoms: Tuple[Tuple[float, float], ...] = ()
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown ensemble kind {self.kind!r}")
        if self.size < 1:
            raise ContractError("ensemble size must be positive")
        if self.kind != "gue" and not self.atoms:
            raise ContractError(f"{self.kind} ensemble needs atoms")
        object.__setattr__(self, "atoms", tuple((float(w), float(a)) for w, a in self.atoms))

    def diagonal(self):
        """Atom values repeated by largest-remainder rounding of ``fraction * size``."""
        w = np.array([p for p, _ in self.atoms])
        vals = np.array([a for _, a in self.atoms])
        raw = w / w.sum() * self.size
        counts = np.floor(raw).astype(int)
        short = self.size - counts.sum()
        counts[np.argsort(-(raw - counts), kind="stable")[:short]] += 1
        return np.repeat(vals, counts)


@dataclass
class Histogram:
    """Eigenvalue histogram; ``samples`` keeps the raw eigenvalues."""

    bin_edges: np.ndarray
    counts: np.ndarray
    samples: np.ndarray = field(repr=False, default=None)
    trials: int = 1
    singular_trials: int = 0

    @property
    def normalization(self):
        total = self.counts.sum()
        widths = np.diff(self.bin_edges)
        return self.counts / (total * widths) if total else np.zeros_like(widths, dtype=float)

    @classmethod
    def from_samples(cls, samples, bins="fd", trials=1, singular_trials=0):
        samples = np.sort(np.asarray(samples, dtype=float))
        if samples.size == 0:
            return cls(np.array([0.0, 1.0]), np.zeros(1, dtype=int), samples, trials, singular_trials)
        edges = np.histogram_bin_edges(samples, bins=bins)
        counts, edges = np.histogram(samples, bins=edges)
        return cls(edges, counts, samples, trials, singular_trials)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "count", "density_estimate"])
            for lo, hi, c, d in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts, self.normalization):
                w.writerow([f"{lo:.17g}", f"{hi:.17g}", int(c), f"{d:.17g}"])


def sample_gue(N, seed=0):
    """GUE matrix normalised so that off-diagonal ``E|a_ij|^2 = 1/N``."""
    rng = _rng(seed)
    x = rng.normal(scale=np.sqrt(0.5 / N), size=(N, N)) + 1j * rng.normal(scale=np.sqrt(0.5 / N), size=(N, N))
    return (x + x.conj().T) / np.sqrt(2.0)


def sample_haar_unitary(N, seed=0):
    """Haar unitary from the QR factorisation of a Ginibre matrix."""
    rng = _rng(seed)
    z = (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))) / np.sqrt(2.0)
    q, r = scipy.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def sample(spec: EnsembleSpec, rng):
    if spec.kind == "gue":
        return spec.scale * sample_gue(spec.size, rng)
    diag = spec.diagonal().astype(complex)
    if spec.kind == "deterministic":
        return np.diag(diag)
    u = sample_haar_unitary(spec.size, rng)
    return (u * diag) @ u.conj().T


def _trial_spectrum(target, ensembles, seed, trial):
    streams = np.random.SeedSequence([int(seed), int(trial)]).spawn(len(ensembles))
    mats = [sample(e, np.random.Generator(np.random.Philox(s))) for e, s in zip(ensembles, streams)]
    if isinstance(target, LinearPencil):
        m = target.evaluate(mats)
    else:
        m = ncexpr.evaluate(target, mats)
    return scipy.linalg.eigvalsh((m + m.conj().T) / 2, check_finite=False)


def assemble_and_spectrum(target, ensembles: Sequence[EnsembleSpec], trials=1, seed=None, *, bins="fd",
                          workers=1):
    """Collect eigenvalues of ``target`` evaluated on sampled matrices.

    ``target`` is a parsed expression (evaluated on the ``N x N`` samples)
    or a :class:`LinearPencil` (giving the block matrix
    ``b0 (x) 1 + sum b_k (x) X_k``).  Trials whose expression is singular are
    skipped and counted.
    """
    ensembles = list(ensembles)
    if len({e.size for e in ensembles}) > 1:
        raise ContractError("all ensembles must have the same size")
    seed = ensembles[0].seed if seed is None else seed

    def one(t):
        try:
            return _trial_spectrum(target, ensembles, seed, t)
        except SingularMatrixError:
            return None

    if workers > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(one, range(trials)))
    else:
        spectra = [one(t) for t in range(trials)]
    good = [s for s in spectra if s is not None]
    samples = np.concatenate(good) if good else np.empty(0)
    return Histogram.from_samples(samples, bins=bins, trials=trials, singular_trials=trials - len(good))


def ks_distance(h, d):
    """Sup distance between the empirical CDF of ``h`` and the CDF of density ``d``."""
    x = np.sort(h.samples) if h.samples is not None else None
    if x is None or x.size == 0:
        raise ContractError("histogram carries no samples")
    F = d.cdf(x)
    n = x.size
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(np.abs(F - upper)), np.max(np.abs(F - lower))))
