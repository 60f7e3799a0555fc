# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: small complex inverses, the semicircular fixed
point w -> (z - eta(w))^{-1}, and weighted resolvent sums.

Every function mirrors one in ``_fallback`` and returns a status code
instead of raising: 0 converged / ok, 1 singular matrix, 2 iteration cap.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport sqrt

cnp.import_array()

ctypedef double complex cplx

cdef double SINGULAR_RTOL = 1e-14


cdef inline double _abs2(cplx x) noexcept nogil:
    return x.real * x.real + x.imag * x.imag


cdef int _invert(cplx* a, cplx* inv, int n) noexcept nogil:
    """Gauss-Jordan with partial pivoting; ``a`` is destroyed."""
    cdef int i, j, k, p
    cdef double best, v, scale = 0.0
    cdef cplx f, tmp
    for i in range(n * n):
        v = _abs2(a[i])
        if v > scale:
            scale = v
    if scale == 0.0:
        return 1
    for i in range(n):
        for j in range(n):
            inv[i * n + j] = 1.0 if i == j else 0.0
    for k in range(n):
        p = k
        best = _abs2(a[k * n + k])
        for i in range(k + 1, n):
            v = _abs2(a[i * n + k])
            if v > best:
                best = v
                p = i
        if best < SINGULAR_RTOL * SINGULAR_RTOL * scale:
            return 1
        if p != k:
            for j in range(n):
                tmp = a[k * n + j]
                a[k * n + j] = a[p * n + j]
                a[p * n + j] = tmp
                tmp = inv[k * n + j]
                inv[k * n + j] = inv[p * n + j]
                inv[p * n + j] = tmp
        f = 1.0 / a[k * n + k]
        for j in range(k, n):
            a[k * n + j] = a[k * n + j] * f
        for j in range(n):
            inv[k * n + j] = inv[k * n + j] * f
        for i in range(n):
            if i != k:
                f = a[i * n + k]
                if f.real != 0.0 or f.imag != 0.0:
                    for j in range(k, n):
                        a[i * n + j] = a[i * n + j] - f * a[k * n + j]
                    for j in range(n):
                        inv[i * n + j] = inv[i * n + j] - f * inv[k * n + j]
    return 0


cdef void _matmul(const cplx* a, const cplx* b, cplx* out, int n) noexcept nogil:
    cdef int i, j, k
    cdef cplx aik
    for i in range(n * n):
        out[i] = 0.0
    for i in range(n):
        for k in range(n):
            aik = a[i * n + k]
            if aik.real != 0.0 or aik.imag != 0.0:
                for j in range(n):
                    out[i * n + j] = out[i * n + j] + aik * b[k * n + j]


cdef void _eta_list(const cplx* bs, int d, const cplx* w, cplx* out, cplx* tmp, cplx* tmp2, int n) noexcept nogil:
    cdef int j, i
    cdef int nn = n * n
    for i in range(nn):
        out[i] = 0.0
    for j in range(d):
        _matmul(w, bs + j * nn, tmp, n)
        _matmul(bs + j * nn, tmp, tmp2, n)
        for i in range(nn):
            out[i] = out[i] + tmp2[i]


cdef void _eta_action(const cplx* L, const cplx* w, cplx* out, int n) noexcept nogil:
    cdef int i, j
    cdef int nn = n * n
    cdef cplx s
    for i in range(nn):
        s = 0.0
        for j in range(nn):
            s = s + L[i * nn + j] * w[j]
        out[i] = s


cdef inline double _fro(const cplx* a, int nn) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(nn):
        s += _abs2(a[i])
    return sqrt(s)


cdef int _hrs(const cplx* z, const cplx* eta_data, int d, int action, cplx* w, int n,
              double tol, long maxiter, double alpha, int auto_damp,
              long* iters_out, double* defect_out, int* damped_out) noexcept nogil:
    cdef int nn = n * n
    cdef cplx* e = <cplx*> malloc(nn * sizeof(cplx))
    cdef cplx* m = <cplx*> malloc(nn * sizeof(cplx))
    cdef cplx* f = <cplx*> malloc(nn * sizeof(cplx))
    cdef cplx* t1 = <cplx*> malloc(nn * sizeof(cplx))
    cdef cplx* t2 = <cplx*> malloc(nn * sizeof(cplx))
    cdef long it
    cdef int i, status = 2
    cdef double defect = 0.0, wn, ref = -1.0
    damped_out[0] = 0 if alpha >= 1.0 else 1
    for it in range(maxiter):
        if action:
            _eta_action(eta_data, w, e, n)
        else:
            _eta_list(eta_data, d, w, e, t1, t2, n)
        for i in range(nn):
            m[i] = z[i] - e[i]
        if _invert(m, f, n) != 0:
            status = 1
            iters_out[0] = it + 1
            break
        defect = 0.0
        for i in range(nn):
            defect += _abs2(f[i] - w[i])
        defect = sqrt(defect)
        wn = _fro(w, nn)
        for i in range(nn):
            w[i] = (1.0 - alpha) * w[i] + alpha * f[i]
        iters_out[0] = it + 1
        if alpha * defect <= tol * (wn if wn > 1.0 else 1.0):
            status = 0
            break
        if auto_damp and alpha >= 1.0 and (it + 1) % 50 == 0:
            if ref >= 0.0 and defect > 0.99 * ref:
                alpha = 0.5
                damped_out[0] = 1
            ref = defect
    defect_out[0] = defect
    free(e); free(m); free(f); free(t1); free(t2)
    return status


def invert(cnp.ndarray a):
    """Return ``(status, inverse)``."""
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] work = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef int n = work.shape[0]
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] out = np.empty((n, n), dtype=np.complex128)
    cdef int status
    with nogil:
        status = _invert(&work[0, 0], &out[0, 0], n)
    return status, out


def hrs_solve(z, eta_kind, eta_data, w0, double tol, long maxiter, double alpha, bint auto_damp):
    """Iterate ``w <- (1-a) w + a (z - eta(w))^{-1}``.

    ``eta_kind`` is ``"list"`` (``eta_data`` of shape (d, n, n), eta(w) =
    sum_j b_j w b_j) or ``"action"`` (``eta_data`` of shape (n^2, n^2) acting
    on the row-major vectorisation).  Returns ``(status, w, iterations,
    last_defect, damped)``.
    """
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] zz = np.ascontiguousarray(z, dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] w = np.array(w0, dtype=np.complex128, order="C", copy=True)
    cdef cnp.ndarray ed = np.ascontiguousarray(eta_data, dtype=np.complex128)
    cdef int n = zz.shape[0]
    cdef int d = 0
    cdef int action = 0
    cdef long iters = 0
    cdef double defect = 0.0
    cdef int damped = 0
    cdef int status
    cdef cplx* edp
    if eta_kind == "action":
        action = 1
        if ed.shape[0] != n * n:
            raise ValueError("action matrix has the wrong size")
    else:
        d = ed.shape[0]
    edp = <cplx*> cnp.PyArray_DATA(ed)
    if ed.size == 0:
        ed = np.zeros((1, n, n), dtype=np.complex128)
        edp = <cplx*> cnp.PyArray_DATA(ed)
        d = 1
    with nogil:
        status = _hrs(&zz[0, 0], edp, d, action, &w[0, 0], n, tol, maxiter, alpha,
                      auto_damp, &iters, &defect, &damped)
    return status, w, iters, defect, bool(damped)


def atomic_cauchy(c, weights, atoms, z):
    """``sum_k weights[k] * (z - atoms[k] * c)^{-1}``; returns ``(status, G)``."""
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] cc = np.ascontiguousarray(c, dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] zz = np.ascontiguousarray(z, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=1] ww = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] tt = np.ascontiguousarray(atoms, dtype=np.float64)
    cdef int n = zz.shape[0]
    cdef int nn = n * n
    cdef int K = ww.shape[0]
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] out = np.zeros((n, n), dtype=np.complex128)
    cdef cplx* m = <cplx*> malloc(nn * sizeof(cplx))
    cdef cplx* r = <cplx*> malloc(nn * sizeof(cplx))
    cdef cplx* zp = &zz[0, 0]
    cdef cplx* cp = &cc[0, 0]
    cdef cplx* op = &out[0, 0]
    cdef int k, i, status = 0
    with nogil:
        for k in range(K):
            for i in range(nn):
                m[i] = zp[i] - tt[k] * cp[i]
            if _invert(m, r, n) != 0:
                status = 1
                break
            for i in range(nn):
                op[i] = op[i] + ww[k] * r[i]
    free(m)
    free(r)
    return status, out
