"""Pure numpy implementations of the hot kernels.

Semantics match mrbz._kernels._core exactly; only the summation order of
dot products differs (BLAS vs scalar loop), so results agree to rounding.
"""

import numpy as np

NAME = "pure"


def csr_matvec(indptr, indices, data, x):
    """y = A @ x for a CSR matrix with no empty-row assumptions."""
    rows = np.repeat(np.arange(indptr.size - 1), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=indptr.size - 1)


def pcg_jacobi(indptr, indices, data, b, x0, inv_diag, tol, max_iter):
    """Conjugate gradients with diagonal preconditioning.

    Stops when ||b - A x||_2 <= tol * ||b||_2. Returns
    (x, iterations, relative_residual, converged).
    """
    n = indptr.size - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))

    def matvec(v):
        return np.bincount(rows, weights=data * v[indices], minlength=n)

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n), 0, 0.0, True

    x = x0.copy()
    r = b - matvec(x)
    res = float(np.linalg.norm(r))
    if res <= tol * b_norm:
        return x, 0, res / b_norm, True

    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        ap = matvec(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            return x, k, res / b_norm, False
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r))
        if res <= tol * b_norm:
            return x, k, res / b_norm, True
        z = inv_diag * r
        rz_new = float(r @ z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    return x, max_iter, res / b_norm, False
