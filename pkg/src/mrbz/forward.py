"""Electrode-drive forward problems and the shunt-model current scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ElectrodeEmpty, InvalidArgument
from .fem import (
    NodalField,
    SparseSystem,
    apply_dirichlet,
    assemble_stiffness,
    solve_spd,
)
from .mesh import BoundaryTag, Mesh


@dataclass
class DriveConfig:
    """Which electrode pair drives the problem and how it is normalized.

    apply_scaling rescales the Dirichlet solution to carry the prescribed
    total current through the positive electrode (the shunt-model
    representative); the experiments leave it off and work with the raw
    0/1 Dirichlet solution.
    """

    electrode_pair: int = 1
    current: float = 1.0
    apply_scaling: bool = False

    def __post_init__(self):
        if self.electrode_pair not in (1, 2):
            raise InvalidArgument(
                f"electrode_pair must be 1 or 2, got {self.electrode_pair}"
            )
        if self.apply_scaling and self.current <= 0:
            raise InvalidArgument("current must be positive when scaling")


def forward_system(mesh: Mesh, sigma: NodalField, pair: int) -> SparseSystem:
    """Constrained stiffness system for drive `pair` (Dirichlet 1 on E+,
    0 on E-, natural elsewhere)."""
    plus, minus = mesh.drive_nodes(pair)
    if len(plus) == 0 or len(minus) == 0:
        raise ElectrodeEmpty(f"electrode pair {pair} has no tagged edges")
    matrix = assemble_stiffness(mesh, sigma)
    system = SparseSystem(matrix, np.zeros(mesh.num_nodes))
    constraints = [(i, 1.0) for i in plus] + [(i, 0.0) for i in minus]
    return apply_dirichlet(system, constraints)


def solve_forward(mesh: Mesh, sigma: NodalField, drive: DriveConfig,
                  tol: float = 1e-10, max_iter: int | None = None,
                  x0: np.ndarray | None = None) -> NodalField:
    """Solve one electrode-drive problem; optionally scale per the shunt
    model (field times current / flux through E+)."""
    system = forward_system(mesh, sigma, drive.electrode_pair)
    u = NodalField(mesh, solve_spd(system, tol=tol, max_iter=max_iter, x0=x0))
    if drive.apply_scaling:
        plus_tag = (BoundaryTag.E1PLUS if drive.electrode_pair == 1
                    else BoundaryTag.E2PLUS)
        flux = electrode_flux(mesh, sigma, u, plus_tag)
        u = NodalField(mesh, (drive.current / flux) * u.values)
    return u


def electrode_flux(mesh: Mesh, sigma: NodalField, u: NodalField,
                   electrode: BoundaryTag, stiffness=None) -> float:
    """Variational (consistent) flux through one electrode.

    Evaluates b(u, chi; sigma) with chi the nodal indicator of the
    electrode's nodes; positive sign means current leaving the domain
    through that electrode. Superconvergent compared to differentiating
    the P1 solution on the boundary. Pass the already assembled stiffness
    to skip reassembly.
    """
    nodes = mesh.electrode_nodes(electrode)
    matrix = assemble_stiffness(mesh, sigma) if stiffness is None else stiffness
    ku = matrix.matvec(u.values)
    return float(ku[nodes].sum())
