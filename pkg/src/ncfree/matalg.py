"""Dense complex matrix helpers and half-plane geometry.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  The
upper half-plane of a square matrix algebra consists of the matrices ``a``
whose imaginary part ``(a - a^*) / 2i`` is positive definite; the lower
half-plane is defined with the opposite sign.
"""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, SingularMatrixError

__all__ = [
    "HalfPlaneCertificate",
    "as_matrix",
    "imaginary_part",
    "real_part",
    "solve_inverse",
    "half_plane_membership",
    "operator_norm",
    "hermitian_eigvalsh",
    "is_hermitian",
]

SINGULAR_RTOL = 1e-14
MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True)
class HalfPlaneCertificate:
    """Largest ``epsilon`` with ``±Im(matrix) >= epsilon * 1`` (0 if none)."""

    matrix: np.ndarray
    epsilon: float
    sign: str = "upper"

    @property
    def member(self):
        return self.epsilon > MEMBERSHIP_TOL


def as_matrix(a, square=False):
    """Return ``a`` as a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def imaginary_part(a):
    a = as_matrix(a, square=True)
    h = (a - a.conj().T) / 2j
    return (h + h.conj().T) / 2


def real_part(a):
    a = as_matrix(a, square=True)
    return (a + a.conj().T) / 2


def is_hermitian(a, tol=0.0):
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and bool(np.all(np.abs(a - a.conj().T) <= tol))


def solve_inverse(a, where=None):
    """Invert ``a`` by LU factorisation with partial pivoting.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``1e-14 * max|a_ij|``.
    """
    a = as_matrix(a, square=True)
    scale = np.abs(a).max()
    if scale == 0.0:
        raise SingularMatrixError(0.0, where)
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    smallest = pivots.min()
    if smallest < SINGULAR_RTOL * scale:
        raise SingularMatrixError(smallest, where)
    return scipy.linalg.lu_solve((lu, piv), np.eye(a.shape[0], dtype=complex), check_finite=False)


def hermitian_eigvalsh(h):
    """Eigenvalues (ascending) of a Hermitian matrix."""
    h = np.asarray(h)
    return scipy.linalg.eigvalsh((h + h.conj().T) / 2, check_finite=False)


def half_plane_membership(a, sign="upper"):
    """Certify membership of ``a`` in the strict upper or lower half-plane."""
    if sign not in ("upper", "lower"):
        raise ValueError("sign must be 'upper' or 'lower'")
    im = imaginary_part(a)
    if sign == "lower":
        im = -im
    eps = float(hermitian_eigvalsh(im)[0])
    return HalfPlaneCertificate(matrix=np.asarray(a), epsilon=max(eps, 0.0), sign=sign)


def operator_norm(a):
    """Largest singular value."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    return float(scipy.linalg.svdvals(a, check_finite=False)[0])
