# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the hot kernels in mrbz._kernels.pure."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

NAME = "compiled"


def csr_matvec(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
               double[::1] data, double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    y_arr = np.zeros(n)
    cdef double[::1] y = y_arr
    cdef Py_ssize_t i, k
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * x[indices[k]]
            y[i] = acc
    return y_arr


cdef void _matvec(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                  double[::1] data, double[::1] x, double[::1] y) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(indptr.shape[0] - 1):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        y[i] = acc


def pcg_jacobi(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
               double[::1] data, double[::1] b, double[::1] x0,
               double[::1] inv_diag, double tol, long max_iter):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i
    cdef long k
    cdef double b_norm = 0.0, res = 0.0, rz = 0.0, rz_new, pap, alpha, beta

    x_arr = np.empty(n)
    cdef double[::1] x = x_arr
    r_arr = np.empty(n)
    cdef double[::1] r = r_arr
    z_arr = np.empty(n)
    cdef double[::1] z = z_arr
    p_arr = np.empty(n)
    cdef double[::1] p = p_arr
    ap_arr = np.empty(n)
    cdef double[::1] ap = ap_arr

    with nogil:
        for i in range(n):
            b_norm += b[i] * b[i]
    b_norm = sqrt(b_norm)
    if b_norm == 0.0:
        x_arr[:] = 0.0
        return x_arr, 0, 0.0, True

    with nogil:
        for i in range(n):
            x[i] = x0[i]
        _matvec(indptr, indices, data, x, r)
        for i in range(n):
            r[i] = b[i] - r[i]
            res += r[i] * r[i]
    res = sqrt(res)
    if res <= tol * b_norm:
        return x_arr, 0, res / b_norm, True

    with nogil:
        for i in range(n):
            z[i] = inv_diag[i] * r[i]
            p[i] = z[i]
            rz += r[i] * z[i]

    for k in range(1, max_iter + 1):
        with nogil:
            _matvec(indptr, indices, data, p, ap)
            pap = 0.0
            for i in range(n):
                pap += p[i] * ap[i]
        if pap <= 0.0:
            return x_arr, k, res / b_norm, False
        with nogil:
            alpha = rz / pap
            res = 0.0
            for i in range(n):
                x[i] += alpha * p[i]
                r[i] -= alpha * ap[i]
                res += r[i] * r[i]
        res = sqrt(res)
        if res <= tol * b_norm:
            return x_arr, k, res / b_norm, True
        with nogil:
            rz_new = 0.0
            for i in range(n):
                z[i] = inv_diag[i] * r[i]
                rz_new += r[i] * z[i]
            beta = rz_new / rz
            rz = rz_new
            for i in range(n):
                p[i] = z[i] + beta * p[i]
    return x_arr, max_iter, res / b_norm, False
