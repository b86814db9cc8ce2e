"""Harmonic-Bz fixed point iteration: per-triangle vector field from the
inverted gradient matrix, weak Poisson update of the log-conductivity,
exponentiation and the sup-norm termination loop.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._timing import Stopwatch
from .errors import InvalidArgument, SingularCoefficientMatrix
from .fem import (
    NodalField,
    SparseSystem,
    apply_dirichlet,
    constant_field,
    element_gradients,
    solve_spd,
    unit_stiffness,
    weak_divergence_rhs,
)
from .forward import DriveConfig, solve_forward
from .mesh import Mesh, RegionMasks
from .synth import LaplacianBzData

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERATIONS = "max_iterations"


@dataclass
class BzConfig:
    """Knobs of the fixed-point loop.

    boundary_log_value is ln(sigma_b), the known constant background that
    also supplies the Poisson update's Dirichlet data. det_floor guards
    the per-triangle inversion relative to the row-norm product;
    det_fallback chooses between raising and zeroing offending triangles.
    """

    epsilon: float = 1e-6
    mu0: float = 1.0
    max_iterations: int = 100
    det_floor: float = 1e-12
    boundary_log_value: float = 0.0
    det_fallback: str = "error"
    solver_tol: float = 1e-10
    threads: int = 1

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidArgument("epsilon must be positive")
        if self.det_floor < 0:
            raise InvalidArgument("det_floor must be >= 0")
        if self.det_fallback not in ("error", "zero"):
            raise InvalidArgument("det_fallback must be 'error' or 'zero'")
        if self.max_iterations < 1:
            raise InvalidArgument("max_iterations must be >= 1")

    @property
    def sigma_b(self) -> float:
        return math.exp(self.boundary_log_value)


@dataclass
class IterationState:
    """Current iterate of the loop; sigma stays exp(log_sigma) nodewise."""

    sigma: NodalField
    log_sigma: NodalField
    iteration: int = 0
    diff_history: list[float] = field(default_factory=list)
    forward_solves: int = 0


@dataclass
class ReconstructionResult:
    sigma: NodalField
    log_sigma: NodalField
    diff_history: list[float]
    iterations: int
    forward_solves: int
    wall_ms: float
    status: str
    phase_ms: dict[str, float] = field(default_factory=dict)

    @property
    def final_diff(self) -> float:
        return self.diff_history[-1] if self.diff_history else float("nan")


def assemble_A(grad_u1: np.ndarray, grad_u2: np.ndarray) -> np.ndarray:
    """Per-triangle 2x2 matrices with row j = (du_j/dy, -du_j/dx)."""
    grad_u1 = np.asarray(grad_u1, dtype=np.float64)
    grad_u2 = np.asarray(grad_u2, dtype=np.float64)
    if grad_u1.shape != grad_u2.shape or grad_u1.ndim != 2 or grad_u1.shape[1] != 2:
        raise InvalidArgument("gradient arrays must both have shape (T, 2)")
    out = np.empty((grad_u1.shape[0], 2, 2))
    out[:, 0, 0] = grad_u1[:, 1]
    out[:, 0, 1] = -grad_u1[:, 0]
    out[:, 1, 0] = grad_u2[:, 1]
    out[:, 1, 1] = -grad_u2[:, 0]
    return out


def vector_field(sigma: NodalField, A: np.ndarray, data: LaplacianBzData,
                 masks: RegionMasks, cfg: BzConfig) -> np.ndarray:
    """V = (sigma A)^{-1} (lap1, lap2)^t / mu0 on inner triangles, zero
    outside. sigma enters as the per-triangle vertex mean."""
    mesh = data.mesh
    inner = masks.inner
    a = A[:, 0, 0]
    b = A[:, 0, 1]
    c = A[:, 1, 0]
    d = A[:, 1, 1]
    det = a * d - b * c
    scale = np.hypot(a, b) * np.hypot(c, d)
    ok = np.abs(det) > cfg.det_floor * scale
    bad = inner & ~ok
    if np.any(bad):
        if cfg.det_fallback == "error":
            t = int(np.argmax(bad))
            raise SingularCoefficientMatrix(t, float(det[t]))
        inner = inner & ok

    sig_mean = sigma.values[mesh.triangles].mean(axis=1)
    out = np.zeros((mesh.num_triangles, 2))
    idx = np.flatnonzero(inner)
    denom = cfg.mu0 * sig_mean[idx] * det[idx]
    l1 = data.lap1[idx]
    l2 = data.lap2[idx]
    out[idx, 0] = (d[idx] * l1 - b[idx] * l2) / denom
    out[idx, 1] = (-c[idx] * l1 + a[idx] * l2) / denom
    return out


def poisson_system(mesh: Mesh, boundary_log_value: float) -> SparseSystem:
    """Unit-stiffness system with Dirichlet ln(sigma_b) on every boundary
    node, ready for repeated right-hand sides."""
    base = SparseSystem(unit_stiffness(mesh), np.zeros(mesh.num_nodes))
    constraints = [(int(i), boundary_log_value) for i in mesh.boundary_nodes()]
    return apply_dirichlet(base, constraints)


def update_log_sigma(mesh: Mesh, V: np.ndarray, cfg: BzConfig,
                     system: SparseSystem | None = None,
                     x0: np.ndarray | None = None) -> NodalField:
    """Weak Poisson solve of laplace(w) = div(V) with w = ln(sigma_b) on
    the whole boundary."""
    if system is None:
        system = poisson_system(mesh, cfg.boundary_log_value)
    rhs = weak_divergence_rhs(mesh, V)
    sol = solve_spd(system.with_rhs(rhs), tol=cfg.solver_tol, x0=x0)
    return NodalField(mesh, sol)


def _solve_drives(mesh, sigma, cfg, warm):
    drives = (DriveConfig(electrode_pair=1), DriveConfig(electrode_pair=2))
    if cfg.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=2) as pool:
            futs = [
                pool.submit(solve_forward, mesh, sigma, d, cfg.solver_tol,
                            None, w)
                for d, w in zip(drives, warm)
            ]
            return [f.result() for f in futs]
    return [solve_forward(mesh, sigma, d, tol=cfg.solver_tol, x0=w)
            for d, w in zip(drives, warm)]


def reconstruct_bz(mesh: Mesh, masks: RegionMasks, data: LaplacianBzData,
                   cfg: BzConfig | None = None) -> ReconstructionResult:
    """Run the fixed-point loop from sigma_b until the nodal max change
    of ln(sigma) drops below epsilon (or the iteration cap)."""
    cfg = cfg or BzConfig()
    if data.mesh is not mesh and data.mesh.num_triangles != mesh.num_triangles:
        raise InvalidArgument("data was synthesized on a different mesh")
    t_start = time.perf_counter()

    state = IterationState(
        sigma=constant_field(mesh, cfg.sigma_b),
        log_sigma=constant_field(mesh, cfg.boundary_log_value),
    )
    sw = Stopwatch()
    system = poisson_system(mesh, cfg.boundary_log_value)
    warm: list[np.ndarray | None] = [None, None]
    status = STATUS_MAX_ITERATIONS

    while state.iteration < cfg.max_iterations:
        with sw.phase("full_solve"):
            u1, u2 = _solve_drives(mesh, state.sigma, cfg, warm)
        warm = [u1.values, u2.values]
        state.forward_solves += 2
        with sw.phase("vector_field"):
            A = assemble_A(element_gradients(mesh, u1),
                           element_gradients(mesh, u2))
            V = vector_field(state.sigma, A, data, masks, cfg)
        with sw.phase("poisson"):
            log_new = update_log_sigma(mesh, V, cfg, system=system,
                                       x0=state.log_sigma.values)
        diff = float(np.max(np.abs(log_new.values - state.log_sigma.values)))
        state.diff_history.append(diff)
        state.log_sigma = log_new
        state.sigma = NodalField(mesh, np.exp(log_new.values))
        state.iteration += 1
        if diff < cfg.epsilon:
            status = STATUS_CONVERGED
            break

    wall_ms = (time.perf_counter() - t_start) * 1e3
    return ReconstructionResult(
        sigma=state.sigma,
        log_sigma=state.log_sigma,
        diff_history=state.diff_history,
        iterations=state.iteration,
        forward_solves=state.forward_solves,
        wall_ms=wall_ms,
        status=status,
        phase_ms=sw.ms,
    )
