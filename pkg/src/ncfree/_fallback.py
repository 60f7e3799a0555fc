"""Pure numpy versions of the compiled kernels in ``_kernels``.

Signatures and status codes match exactly: 0 ok, 1 singular matrix,
2 iteration cap reached.
"""
import numpy as np

SINGULAR_RTOL = 1e-14


def invert(a):
    """Return ``(status, inverse)``."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[0]
    scale = np.abs(a).max() if a.size else 0.0
    if scale == 0.0:
        return 1, np.zeros((n, n), dtype=np.complex128)
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        return 1, np.zeros((n, n), dtype=np.complex128)
    # reject numerically singular input the same way the pivoting kernel does
    if not np.all(np.isfinite(inv)) or np.abs(inv).max() * SINGULAR_RTOL * scale > 1.0:
        return 1, inv
    return 0, inv


def _eta_fn(eta_kind, eta_data, n):
    eta_data = np.asarray(eta_data, dtype=np.complex128)
    if eta_kind == "action":
        if eta_data.shape[0] != n * n:
            raise ValueError("action matrix has the wrong size")
        return lambda w: (eta_data @ w.reshape(-1)).reshape(n, n)
    bs = eta_data
    if bs.size == 0:
        return lambda w: np.zeros((n, n), dtype=np.complex128)
    return lambda w: np.einsum("kij,jl,klm->im", bs, w, bs)


def hrs_solve(z, eta_kind, eta_data, w0, tol, maxiter, alpha, auto_damp):
    """Iterate ``w <- (1-a) w + a (z - eta(w))^{-1}``.

    Returns ``(status, w, iterations, last_defect, damped)``.
    """
    z = np.asarray(z, dtype=np.complex128)
    w = np.array(w0, dtype=np.complex128)
    n = z.shape[0]
    eta = _eta_fn(eta_kind, eta_data, n)
    damped = alpha < 1.0
    ref = -1.0
    defect = 0.0
    status = 2
    it = 0
    for it in range(1, int(maxiter) + 1):
        st, f = invert(z - eta(w))
        if st:
            status = 1
            break
        defect = float(np.linalg.norm(f - w))
        wn = float(np.linalg.norm(w))
        w = (1.0 - alpha) * w + alpha * f
        if alpha * defect <= tol * max(wn, 1.0):
            status = 0
            break
        if auto_damp and alpha >= 1.0 and it % 50 == 0:
            if ref >= 0.0 and defect > 0.99 * ref:
                alpha = 0.5
                damped = True
            ref = defect
    return status, w, it, defect, damped


def atomic_cauchy(c, weights, atoms, z):
    """``sum_k weights[k] * (z - atoms[k] * c)^{-1}``; returns ``(status, G)``."""
    c = np.asarray(c, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    out = np.zeros_like(z)
    for wk, tk in zip(np.asarray(weights, dtype=float), np.asarray(atoms, dtype=float)):
        st, r = invert(z - tk * c)
        if st:
            return 1, out
        out += wk * r
    return 0, out
