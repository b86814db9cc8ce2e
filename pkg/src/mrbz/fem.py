"""P1 finite element core: sparse assembly, constrained SPD solves,
element gradients, H1 inner products and the weak-divergence load vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    InvalidArgument,
    NoConvergence,
    NonCoercive,
    SingularSystem,
)
from .mesh import Mesh


@dataclass
class NodalField:
    """One value per mesh vertex, interpreted piecewise linearly."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != (self.mesh.num_nodes,):
            raise InvalidArgument(
                f"field length {self.values.shape} does not match "
                f"{self.mesh.num_nodes} mesh nodes"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgument("field contains non-finite values")

    def copy(self) -> "NodalField":
        return NodalField(self.mesh, self.values.copy())


def constant_field(mesh: Mesh, value: float) -> NodalField:
    return NodalField(mesh, np.full(mesh.num_nodes, float(value)))


class CsrMatrix:
    """Minimal symmetric CSR container shared by both kernel backends."""

    __slots__ = ("n", "indptr", "indices", "data")

    def __init__(self, n, indptr, indices, data):
        self.n = int(n)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)

    @classmethod
    def from_coo(cls, n, rows, cols, vals) -> "CsrMatrix":
        """Canonical CSR: entries sorted by (row, col), duplicates summed
        in that fixed order, so assembly is deterministic."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        first = np.ones(len(rows), dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(first)
        data = np.add.reduceat(vals, starts)
        urows = rows[starts]
        ucols = cols[starts]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, urows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, ucols, data)

    @property
    def nnz(self) -> int:
        return len(self.data)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return _kernels.csr_matvec(self.indptr, self.indices, self.data,
                                   np.ascontiguousarray(x, dtype=np.float64))

    __matmul__ = matvec

    def diagonal(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        on_diag = rows == self.indices
        diag = np.zeros(self.n)
        diag[rows[on_diag]] = self.data[on_diag]
        return diag

    def copy(self) -> "CsrMatrix":
        return CsrMatrix(self.n, self.indptr.copy(), self.indices.copy(),
                         self.data.copy())

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        out[rows, self.indices] = self.data
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        return sp.csr_matrix((self.data, self.indices, self.indptr),
                             shape=(self.n, self.n))


@dataclass
class SparseSystem:
    """Symmetric sparse system with optional Dirichlet constraints.

    After apply_dirichlet the matrix is the symmetric elimination of the
    raw operator (constrained rows/columns zeroed, unit diagonal) and is
    SPD on the free nodes; `with_rhs` re-derives the constrained
    right-hand side for a new raw load without reassembling.
    """

    matrix: CsrMatrix
    rhs: np.ndarray
    constrained_nodes: np.ndarray | None = None
    constrained_values: np.ndarray | None = None
    _raw_matrix: CsrMatrix | None = None
    _rhs_correction: np.ndarray | None = None

    @property
    def is_constrained(self) -> bool:
        return self.constrained_nodes is not None

    def with_rhs(self, rhs: np.ndarray) -> "SparseSystem":
        if not self.is_constrained:
            return SparseSystem(self.matrix, np.asarray(rhs, dtype=np.float64))
        b = np.asarray(rhs, dtype=np.float64) - self._rhs_correction
        b[self.constrained_nodes] = self.constrained_values
        return SparseSystem(self.matrix, b, self.constrained_nodes,
                            self.constrained_values, self._raw_matrix,
                            self._rhs_correction)


def _mean_sigma(mesh: Mesh, sigma: NodalField) -> np.ndarray:
    return sigma.values[mesh.triangles].mean(axis=1)


def assemble_stiffness(mesh: Mesh, sigma: NodalField) -> CsrMatrix:
    """Stiffness matrix of the form integral(sigma grad(u).grad(v)) with
    sigma per triangle taken as the vertex mean."""
    if np.any(sigma.values <= 0.0):
        bad = int(np.argmax(sigma.values <= 0.0))
        raise NonCoercive(
            f"sigma must be strictly positive (node {bad}: {sigma.values[bad]})"
        )
    coeff = mesh.areas * _mean_sigma(mesh, sigma)
    return _assemble_grad_grad(mesh, coeff)


def _assemble_grad_grad(mesh: Mesh, coeff: np.ndarray) -> CsrMatrix:
    g = mesh.grads  # (T, 3, 2)
    local = np.einsum("tid,tjd->tij", g, g) * coeff[:, None, None]
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return CsrMatrix.from_coo(mesh.num_nodes, rows, cols, local.ravel())


def _assemble_mass(mesh: Mesh) -> CsrMatrix:
    # exact P1 mass: integral(phi_i phi_j) = |T|/12 * (1 + delta_ij)
    local = np.full((3, 3), 1.0 / 12.0)
    np.fill_diagonal(local, 1.0 / 6.0)
    vals = mesh.areas[:, None, None] * local[None, :, :]
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return CsrMatrix.from_coo(mesh.num_nodes, rows, cols, vals.ravel())


def unit_stiffness(mesh: Mesh) -> CsrMatrix:
    """Stiffness for sigma identical to 1, cached on the mesh."""
    mat = mesh._cache.get("unit_stiffness")
    if mat is None:
        mat = _assemble_grad_grad(mesh, mesh.areas.copy())
        mesh._cache["unit_stiffness"] = mat
    return mat


def h1_matrix(mesh: Mesh) -> CsrMatrix:
    """Gram matrix of the H1 inner product (mass plus unit stiffness)."""
    mat = mesh._cache.get("h1_matrix")
    if mat is None:
        k = unit_stiffness(mesh)
        m = _assemble_mass(mesh)
        # identical sparsity patterns, so entries add positionally
        assert np.array_equal(k.indptr, m.indptr)
        mat = CsrMatrix(k.n, k.indptr, k.indices, k.data + m.data)
        mesh._cache["h1_matrix"] = mat
    return mat


def apply_dirichlet(system: SparseSystem, constraints) -> SparseSystem:
    """Symmetric elimination of Dirichlet constraints.

    constraints: iterable of (node, value). Constrained rows and columns
    are zeroed, the diagonal set to 1 and the right-hand side adjusted so
    the constrained unknowns solve exactly to their prescribed values.
    """
    nodes = []
    values = []
    seen: dict[int, float] = {}
    for node, value in constraints:
        node = int(node)
        value = float(value)
        if node in seen:
            if seen[node] != value:
                raise InvalidArgument(
                    f"conflicting constraints at node {node}: "
                    f"{seen[node]} vs {value}"
                )
            continue
        seen[node] = value
        nodes.append(node)
        values.append(value)
    nodes = np.asarray(nodes, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)

    raw = system.matrix
    n = raw.n
    mask = np.zeros(n, dtype=bool)
    mask[nodes] = True

    g = np.zeros(n)
    g[nodes] = values
    correction = raw.matvec(g)

    rows = np.repeat(np.arange(n), np.diff(raw.indptr))
    keep = ~(mask[rows] | mask[raw.indices])
    data = np.where(keep, raw.data, 0.0)
    # re-insert the unit diagonal on constrained rows
    diag_pos = _diagonal_positions(raw, nodes)
    data[diag_pos] = 1.0
    elim = CsrMatrix(n, raw.indptr, raw.indices, data)

    b = system.rhs - correction
    b[nodes] = values
    return SparseSystem(elim, b, nodes, values, raw, correction)


def _diagonal_positions(mat: CsrMatrix, nodes: np.ndarray) -> np.ndarray:
    pos = np.empty(len(nodes), dtype=np.int64)
    for k, i in enumerate(nodes):
        lo, hi = mat.indptr[i], mat.indptr[i + 1]
        hit = np.flatnonzero(mat.indices[lo:hi] == i)
        if hit.size == 0:
            raise InvalidArgument(
                f"matrix has no structural diagonal at constrained node {i}"
            )
        pos[k] = lo + hit[0]
    return pos


def solve_spd(system: SparseSystem, tol: float = 1e-10,
              max_iter: int | None = None,
              x0: np.ndarray | None = None) -> np.ndarray:
    """Diagonally preconditioned conjugate gradients.

    Converges when ||Ax - b|| <= tol * ||b||. Deterministic for fixed
    inputs. Raises SingularSystem for an unconstrained operator that
    annihilates constants (pure-Neumann stiffness) and NoConvergence when
    the iteration cap is hit.
    """
    mat = system.matrix
    n = mat.n
    if max_iter is None:
        max_iter = 10 * n + 100

    diag = mat.diagonal()
    if not system.is_constrained:
        ones_image = mat.matvec(np.ones(n))
        scale = float(np.max(np.abs(diag))) if n else 0.0
        if scale > 0 and float(np.max(np.abs(ones_image))) <= 1e-8 * scale:
            raise SingularSystem(
                "unconstrained system annihilates constants; "
                "apply Dirichlet constraints first"
            )

    if np.any(diag <= 0.0):
        raise SingularSystem("matrix diagonal has non-positive entries")
    inv_diag = 1.0 / diag

    start = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    if system.is_constrained:
        start[system.constrained_nodes] = system.constrained_values

    x, iters, relres, converged = _kernels.pcg_jacobi(
        mat.indptr, mat.indices, mat.data,
        np.ascontiguousarray(system.rhs, dtype=np.float64),
        np.ascontiguousarray(start), np.ascontiguousarray(inv_diag),
        float(tol), int(max_iter),
    )
    if not converged:
        raise NoConvergence(
            f"PCG stalled at relative residual {relres:.3e} "
            f"after {iters} iterations (tol {tol:.1e})",
            achieved_residual=relres,
        )
    return x


def element_gradients(mesh: Mesh, u: NodalField) -> np.ndarray:
    """Exact per-triangle gradient of a P1 field, shape (T, 2)."""
    vals = u.values[mesh.triangles]  # (T, 3)
    return np.einsum("ti,tid->td", vals, mesh.grads)


def h1_inner(mesh: Mesh, u: NodalField, v: NodalField) -> float:
    """integral(u v + grad(u).grad(v)) with exact P1 mass and stiffness."""
    return float(u.values @ h1_matrix(mesh).matvec(v.values))


def h1_norm(mesh: Mesh, u: NodalField) -> float:
    return float(np.sqrt(max(h1_inner(mesh, u, u), 0.0)))


def weak_divergence_rhs(mesh: Mesh, vec: np.ndarray) -> np.ndarray:
    """Load vector i -> sum_T |T| V_T . grad(phi_i)|_T.

    This is the right-hand side of the weak Poisson problem
    integral(grad(w).grad(v)) = integral(V.grad(v)); moving the divergence
    onto the test functions is required because V is only piecewise
    constant.
    """
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (mesh.num_triangles, 2):
        raise InvalidArgument(
            f"vector field shape {vec.shape} does not match "
            f"({mesh.num_triangles}, 2)"
        )
    if not np.all(np.isfinite(vec)):
        raise InvalidArgument("vector field contains non-finite values")
    contrib = mesh.areas[:, None] * np.einsum("td,tid->ti", vec, mesh.grads)
    out = np.zeros(mesh.num_nodes)
    np.add.at(out, mesh.triangles.ravel(), contrib.ravel())
    return out
