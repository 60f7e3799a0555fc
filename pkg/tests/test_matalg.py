import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncfree.errors import DimensionError, SingularMatrixError
from ncfree.matalg import (
    as_matrix,
    half_plane_membership,
    imaginary_part,
    is_hermitian,
    operator_norm,
    real_part,
    solve_inverse,
)

from helpers import random_hermitian, random_upper


def test_imaginary_part_examples():
    assert np.allclose(imaginary_part(np.array([[1j]])), [[1]])
    h = random_hermitian(np.random.default_rng(0), 3)
    assert np.allclose(imaginary_part(h), 0)
    assert np.allclose(imaginary_part(np.array([[0, 2j], [0, 0]])), [[0, 1], [1, 0]])


def test_real_and_imaginary_parts_recompose(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.allclose(real_part(a) + 1j * imaginary_part(a), a)
    assert is_hermitian(real_part(a)) and is_hermitian(imaginary_part(a))


def test_solve_inverse_examples():
    assert np.allclose(solve_inverse(np.eye(3)), np.eye(3))
    q = np.array([[0, -1], [-1, 0]])
    assert np.allclose(solve_inverse(q), q)
    assert np.allclose(solve_inverse(np.array([[3, -1], [-1, 0]])), [[0, -1], [-1, -3]])


def test_solve_inverse_singular():
    with pytest.raises(SingularMatrixError):
        solve_inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_as_matrix_rejects_nonsquare_and_nonfinite():
    with pytest.raises(DimensionError):
        as_matrix(np.ones((2, 3)), square=True)
    with pytest.raises(ValueError):
        as_matrix(np.array([[np.nan]]))


def test_half_plane_membership_examples():
    assert half_plane_membership(1j * np.eye(3), "upper").epsilon == pytest.approx(1.0)
    cert = half_plane_membership(random_hermitian(np.random.default_rng(1), 3), "upper")
    assert cert.epsilon == 0.0 and not cert.member
    assert half_plane_membership(np.diag([2j, 0.5j]), "upper").epsilon == pytest.approx(0.5)
    assert half_plane_membership(-1j * np.eye(2), "lower").member


def test_operator_norm_examples():
    assert operator_norm(np.zeros((3, 3))) == 0
    u = np.array([[0, 1j], [1, 0]])
    assert operator_norm(u) == pytest.approx(1.0)
    assert operator_norm(np.array([[0, 2], [0, 0]])) == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_inverse_of_upper_half_plane_point(n, seed):
    rng = np.random.default_rng(seed)
    z = random_upper(rng, n)
    inv = solve_inverse(z)
    assert np.allclose(inv @ z, np.eye(n), atol=1e-10)
    # the inverse of a strict upper point lies in the strict lower half-plane
    assert half_plane_membership(inv, "lower").member
