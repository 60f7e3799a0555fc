import numpy as np


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_upper(rng, n, shift=0.5):
    h = random_hermitian(rng, n)
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return h + 1j * (b @ b.conj().T / n + shift * np.eye(n))


def scalar_similarity(rng, m, n, z):
    """``t (x) 1_n`` with ``t`` in GL_m, chosen so that ``T z T^-1`` stays in the upper half-plane."""
    for _ in range(20):
        t = np.eye(m) + 0.3 * (rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
        T = np.kron(t, np.eye(n))
        w = T @ z @ np.linalg.inv(T)
        if np.linalg.eigvalsh((w - w.conj().T) / 2j)[0] > 1e-3:
            return T
    q, _ = np.linalg.qr(rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
    return np.kron(q, np.eye(n))
