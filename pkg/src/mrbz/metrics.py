"""Nodal max-norm error ratios between conductivity fields."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument
from .fem import NodalField
from .mesh import Mesh, RegionMasks


def _check_same_mesh(a: NodalField, b: NodalField):
    if a.mesh is not b.mesh and (
        a.mesh.num_nodes != b.mesh.num_nodes
        or not np.array_equal(a.mesh.triangles, b.mesh.triangles)
    ):
        raise InvalidArgument("fields live on different meshes")


def mask_nodes(mesh: Mesh, masks: RegionMasks, region: str) -> np.ndarray | None:
    """Node set touched by triangles of the requested region mask."""
    if region == "all":
        return None
    if region == "inner":
        return np.unique(mesh.triangles[masks.inner])
    if region == "contrast":
        return np.unique(mesh.triangles[masks.contrast])
    raise InvalidArgument(f"unknown region {region!r}")


def rel_c_error(field: NodalField, reference: NodalField,
                nodes: np.ndarray | None = None) -> float:
    """max|field - reference| / max|reference| over the given nodes
    (all nodes when omitted); the nodal max norm is exact for P1 fields."""
    _check_same_mesh(field, reference)
    a = field.values if nodes is None else field.values[nodes]
    r = reference.values if nodes is None else reference.values[nodes]
    denom = float(np.max(np.abs(r)))
    if denom == 0.0:
        return 0.0 if float(np.max(np.abs(a - r))) == 0.0 else float("inf")
    return float(np.max(np.abs(a - r))) / denom
