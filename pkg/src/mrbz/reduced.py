"""Snapshot-based reduced spaces per electrode drive.

A reduced solution is represented as lifting + span of H1-orthonormal
zero-trace basis fields; the lifting is the unit-conductivity forward
solution and carries the 0/1 electrode data. The error estimator is the
classic residual dual norm over a coercivity lower bound, with the
coercivity constant from a one-time inverse power iteration on the
constrained (stiffness, H1-gram) pencil.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IllConditionedReducedSystem,
    InvalidArgument,
    NoConvergence,
    TraceMismatch,
)
from .fem import (
    CsrMatrix,
    NodalField,
    SparseSystem,
    apply_dirichlet,
    assemble_stiffness,
    constant_field,
    h1_matrix,
    solve_spd,
    unit_stiffness,
)
from .forward import DriveConfig, solve_forward
from .mesh import Mesh

TRACE_TOL = 1e-12
COND_LIMIT = 1e14


@dataclass
class ReducedSpace:
    """Affine reduced space for one drive: lifting plus zero-trace basis."""

    drive: int
    lifting: NodalField
    basis: list[NodalField] = field(default_factory=list)
    # H1-gram images of the basis fields, kept in step with `basis` so
    # Gram-Schmidt and reduced assembly avoid repeated matvecs.
    _gram_basis: list[np.ndarray] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def mesh(self) -> Mesh:
        return self.lifting.mesh

    def electrode_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return self.mesh.drive_nodes(self.drive)

    def basis_matrix(self) -> np.ndarray:
        """(num_nodes, N) column matrix of the basis fields."""
        if not self.basis:
            return np.zeros((self.mesh.num_nodes, 0))
        return np.column_stack([b.values for b in self.basis])


def init_space(mesh: Mesh, drive: int, tol: float = 1e-12) -> ReducedSpace:
    """Empty space whose lifting is the forward solution at sigma == 1."""
    lifting = solve_forward(mesh, constant_field(mesh, 1.0),
                            DriveConfig(electrode_pair=drive), tol=tol)
    return ReducedSpace(drive=drive, lifting=lifting)


def enrich(space: ReducedSpace, snapshot: NodalField,
           drop_tol: float = 1e-8) -> ReducedSpace:
    """Append the snapshot's zero-trace component, orthonormalized.

    Modified Gram-Schmidt is run twice for stability; candidates whose
    remaining H1 norm falls below drop_tol times the snapshot's H1 norm
    are dropped and the space returned unchanged.
    """
    mesh = space.mesh
    plus, minus = space.electrode_nodes()
    dev_plus = np.abs(snapshot.values[plus] - 1.0).max() if len(plus) else 0.0
    dev_minus = np.abs(snapshot.values[minus]).max() if len(minus) else 0.0
    if max(dev_plus, dev_minus) > TRACE_TOL:
        raise TraceMismatch(
            f"snapshot violates drive-{space.drive} Dirichlet data by "
            f"{max(dev_plus, dev_minus):.3e}"
        )

    gram = h1_matrix(mesh)
    snap_norm = float(np.sqrt(snapshot.values @ gram.matvec(snapshot.values)))
    # two modified Gram-Schmidt passes against the stored basis
    cand = snapshot.values - space.lifting.values
    for _ in range(2):
        for b, gb in zip(space.basis, space._gram_basis):
            cand = cand - float(gb @ cand) * b.values
    gcand = gram.matvec(cand)
    norm = float(np.sqrt(max(cand @ gcand, 0.0)))
    if norm <= drop_tol * max(snap_norm, 1.0):
        return ReducedSpace(space.drive, space.lifting, list(space.basis),
                            list(space._gram_basis))
    psi = cand / norm
    return ReducedSpace(
        space.drive,
        space.lifting,
        list(space.basis) + [NodalField(mesh, psi)],
        list(space._gram_basis) + [gcand / norm],
    )


def solve_reduced(space: ReducedSpace, mesh: Mesh, sigma: NodalField,
                  stiffness: CsrMatrix | None = None
                  ) -> tuple[NodalField, np.ndarray]:
    """Galerkin solve on the reduced space for the given conductivity.

    Assembles the full sparse stiffness once (or reuses a provided one),
    projects it onto the basis and solves the small dense system; the
    load comes entirely from the lifting since the PDE right-hand side
    vanishes.
    """
    if mesh is not space.mesh:
        raise InvalidArgument("mesh does not match the reduced space")
    k = assemble_stiffness(mesh, sigma) if stiffness is None else stiffness
    n_red = space.dimension
    if n_red == 0:
        return space.lifting.copy(), np.zeros(0)
    w = space.basis_matrix()
    kw = np.column_stack([k.matvec(w[:, i]) for i in range(n_red)])
    b_red = w.T @ kw
    f_red = -(w.T @ k.matvec(space.lifting.values))
    cond = float(np.linalg.cond(b_red))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedReducedSystem(
            f"reduced system condition {cond:.3e} exceeds {COND_LIMIT:.0e}",
            condition=cond,
        )
    coeffs = np.linalg.solve(b_red, f_red)
    u_n = NodalField(mesh, space.lifting.values + w @ coeffs)
    return u_n, coeffs


@dataclass
class EstimatorContext:
    """Per-mesh, per-drive pieces of the rigorous error estimator."""

    drive: int
    lambda_min: float
    gram_system: SparseSystem

    def alpha(self, sigma: NodalField) -> float:
        return float(sigma.values.min()) * self.lambda_min


def estimator_context(mesh: Mesh, drive: int,
                      residual_tol: float = 1e-10,
                      max_power_iter: int = 500) -> EstimatorContext:
    """Coercivity reference via inverse power iteration on the pencil
    (unit stiffness, H1 gram), both constrained to zero on the drive's
    electrode nodes. Cached on the mesh."""
    key = ("estimator_context", drive)
    ctx = mesh._cache.get(key)
    if ctx is not None:
        return ctx

    plus, minus = mesh.drive_nodes(drive)
    constrained = np.concatenate([plus, minus])
    zero = [(int(i), 0.0) for i in constrained]
    k_sys = apply_dirichlet(
        SparseSystem(unit_stiffness(mesh), np.zeros(mesh.num_nodes)), zero
    )
    g_sys = apply_dirichlet(
        SparseSystem(h1_matrix(mesh), np.zeros(mesh.num_nodes)), zero
    )

    from scipy.sparse.linalg import splu

    k_mat = k_sys.matrix
    g_mat = g_sys.matrix
    lu = splu(k_mat.to_scipy().tocsc())

    v = np.ones(mesh.num_nodes)
    v[constrained] = 0.0
    v /= np.sqrt(v @ g_mat.matvec(v))
    lam = float("inf")
    for _ in range(max_power_iter):
        gv = g_mat.matvec(v)
        v = lu.solve(gv)
        gv = g_mat.matvec(v)
        v /= np.sqrt(v @ gv)
        kv = k_mat.matvec(v)
        gv = g_mat.matvec(v)
        lam = float(v @ kv) / float(v @ gv)
        resid = np.linalg.norm(kv - lam * gv) / np.linalg.norm(kv)
        if resid < residual_tol:
            break
    else:
        raise NoConvergence(
            f"inverse power iteration residual {resid:.3e} above "
            f"{residual_tol:.1e} after {max_power_iter} iterations",
            achieved_residual=resid,
        )
    ctx = EstimatorContext(drive=drive, lambda_min=lam, gram_system=g_sys)
    mesh._cache[key] = ctx
    return ctx


def error_estimate_with_riesz(
    space: ReducedSpace, mesh: Mesh, sigma: NodalField, u_n: NodalField,
    context: EstimatorContext | None = None,
    stiffness: CsrMatrix | None = None, riesz_tol: float = 1e-11,
    x0: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """error_estimate plus the Riesz representative, so repeated
    evaluations can warm-start the Riesz solve."""
    if context is None:
        context = estimator_context(mesh, space.drive)
    k = assemble_stiffness(mesh, sigma) if stiffness is None else stiffness
    residual = -k.matvec(u_n.values)
    plus, minus = space.electrode_nodes()
    residual[plus] = 0.0
    residual[minus] = 0.0
    v_r = solve_spd(context.gram_system.with_rhs(residual), tol=riesz_tol,
                    x0=x0)
    riesz_norm = float(np.sqrt(max(v_r @ residual, 0.0)))
    return riesz_norm / context.alpha(sigma), v_r


def error_estimate(space: ReducedSpace, mesh: Mesh, sigma: NodalField,
                   u_n: NodalField, context: EstimatorContext | None = None,
                   stiffness: CsrMatrix | None = None,
                   riesz_tol: float = 1e-11) -> float:
    """Rigorous H1 error bound: Riesz norm of the residual over the
    coercivity lower bound alpha(sigma) = min(sigma) * lambda_min."""
    delta, _ = error_estimate_with_riesz(space, mesh, sigma, u_n, context,
                                         stiffness, riesz_tol)
    return delta
