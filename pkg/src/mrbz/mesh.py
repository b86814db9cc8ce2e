"""Structured triangular meshes of the square [-1,1]^2 with electrode tags.

The mesh is the uniform n-by-n grid with every cell split along the
lower-left to upper-right diagonal, which keeps the pixel-phantom mapping
exact and makes the 180-degree rotation an exact triangle permutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ElectrodeEmpty, InvalidArgument

# Comparisons against electrode extents and the square's sides use this
# absolute slack so grid nodes landing on an electrode endpoint are kept.
GEOM_TOL = 1e-12


class BoundaryTag(str, Enum):
    E1PLUS = "E1plus"
    E1MINUS = "E1minus"
    E2PLUS = "E2plus"
    E2MINUS = "E2minus"
    INSULATED = "Insulated"


ELECTRODE_TAGS = (
    BoundaryTag.E1PLUS,
    BoundaryTag.E1MINUS,
    BoundaryTag.E2PLUS,
    BoundaryTag.E2MINUS,
)


class Mesh:
    """Immutable triangulation with per-triangle geometry precomputed.

    Attributes:
        nodes: (N, 2) float64 vertex coordinates.
        triangles: (T, 3) int64 vertex indices, counterclockwise.
        boundary_edges: (B, 2) int64 node pairs tiling the boundary.
        boundary_tags: (B,) array of tag strings (BoundaryTag values).
        areas: (T,) triangle areas, all strictly positive.
        grads: (T, 3, 2) gradients of the three P1 shape functions.
        subdivisions: grid resolution n for structured meshes, else None.
    """

    __slots__ = (
        "nodes",
        "triangles",
        "boundary_edges",
        "boundary_tags",
        "areas",
        "grads",
        "subdivisions",
        "_cache",
    )

    def __init__(self, nodes, triangles, boundary_edges, boundary_tags,
                 subdivisions=None):
        self.nodes = np.ascontiguousarray(nodes, dtype=np.float64)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
        tags = [BoundaryTag(t) for t in boundary_tags]
        self.boundary_tags = np.array([t.value for t in tags])
        self.subdivisions = subdivisions
        self._cache = {}

        p = self.nodes[self.triangles]  # (T, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        twice_area = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(twice_area <= 0):
            bad = int(np.argmax(twice_area <= 0))
            raise InvalidArgument(
                f"triangle {bad} is degenerate or clockwise (2A={twice_area[bad]})"
            )
        self.areas = 0.5 * twice_area
        # grad(phi_i) = rot90(p_k - p_j) / (2A) with (i, j, k) cyclic
        grads = np.empty((len(self.triangles), 3, 2))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            grads[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / twice_area
            grads[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / twice_area
        self.grads = grads

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def electrode_nodes(self, tag: BoundaryTag) -> np.ndarray:
        """Sorted unique node indices on boundary edges carrying `tag`."""
        sel = self.boundary_tags == BoundaryTag(tag).value
        return np.unique(self.boundary_edges[sel])

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def drive_nodes(self, pair: int) -> tuple[np.ndarray, np.ndarray]:
        """(plus, minus) electrode node sets for drive pair 1 or 2."""
        if pair == 1:
            return (self.electrode_nodes(BoundaryTag.E1PLUS),
                    self.electrode_nodes(BoundaryTag.E1MINUS))
        if pair == 2:
            return (self.electrode_nodes(BoundaryTag.E2PLUS),
                    self.electrode_nodes(BoundaryTag.E2MINUS))
        raise InvalidArgument(f"electrode pair must be 1 or 2, got {pair}")


@dataclass
class RegionMasks:
    """Per-triangle membership of the inner disk and the contrast disk."""

    inner: np.ndarray
    contrast: np.ndarray
    r_inner: float = 0.95
    r_contrast: float = 0.9

    def __post_init__(self):
        self.inner = np.asarray(self.inner, dtype=bool)
        self.contrast = np.asarray(self.contrast, dtype=bool)
        if np.any(self.contrast & ~self.inner):
            raise InvalidArgument("contrast mask must be contained in inner mask")


def build_structured_mesh(n: int) -> Mesh:
    """Uniform triangulation of [-1,1]^2: (n+1)^2 nodes, 2*n^2 triangles.

    Boundary edges are emitted counterclockwise starting from the bottom
    side and are all tagged Insulated; use tag_boundaries to attach the
    electrodes.
    """
    if n < 1:
        raise InvalidArgument(f"subdivisions must be >= 1, got {n}")
    coords = (2.0 * np.arange(n + 1) - n) / n
    xg, yg = np.meshgrid(coords, coords, indexing="xy")
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    def idx(ix, iy):
        return iy * (n + 1) + ix

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ix = ix.ravel()
    iy = iy.ravel()
    a = idx(ix, iy)
    b = idx(ix + 1, iy)
    c = idx(ix + 1, iy + 1)
    d = idx(ix, iy + 1)
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([a, b, c])  # below the diagonal
    triangles[1::2] = np.column_stack([a, c, d])  # above the diagonal

    k = np.arange(n)
    bottom = np.column_stack([idx(k, 0), idx(k + 1, 0)])
    right = np.column_stack([idx(n, k), idx(n, k + 1)])
    top = np.column_stack([idx(n - k, n), idx(n - k - 1, n)])
    left = np.column_stack([idx(0, n - k), idx(0, n - k - 1)])
    boundary = np.vstack([bottom, right, top, left])
    tags = [BoundaryTag.INSULATED.value] * len(boundary)
    return Mesh(nodes, triangles, boundary, tags, subdivisions=n)


def tag_boundaries(mesh: Mesh, halfwidth: float = 0.1) -> Mesh:
    """Return a mesh with electrode tags assigned to the boundary edges.

    An edge belongs to E1plus iff both endpoints satisfy x = 1 and
    |y| <= halfwidth (closed interval, with GEOM_TOL slack); the other
    three electrodes follow by symmetry. Everything else is Insulated.
    """
    if not 0.0 < halfwidth < 1.0:
        raise InvalidArgument(f"halfwidth must be in (0, 1), got {halfwidth}")
    pts = mesh.nodes[mesh.boundary_edges]  # (B, 2, 2)
    x = pts[..., 0]
    y = pts[..., 1]
    lim = halfwidth + GEOM_TOL

    def on(side_coord, fixed_value, other):
        return (np.abs(side_coord - fixed_value) <= GEOM_TOL).all(axis=1) & (
            np.abs(other) <= lim
        ).all(axis=1)

    tags = np.full(len(pts), BoundaryTag.INSULATED.value, dtype=object)
    tags[on(x, 1.0, y)] = BoundaryTag.E1PLUS.value
    tags[on(x, -1.0, y)] = BoundaryTag.E1MINUS.value
    tags[on(y, 1.0, x)] = BoundaryTag.E2PLUS.value
    tags[on(y, -1.0, x)] = BoundaryTag.E2MINUS.value

    for tag in ELECTRODE_TAGS:
        if not np.any(tags == tag.value):
            raise ElectrodeEmpty(
                f"halfwidth {halfwidth} leaves electrode {tag.value} empty"
            )
    return Mesh(mesh.nodes, mesh.triangles, mesh.boundary_edges, tags,
                subdivisions=mesh.subdivisions)


def standard_mesh(n: int, halfwidth: float = 0.1) -> Mesh:
    """build_structured_mesh followed by tag_boundaries."""
    return tag_boundaries(build_structured_mesh(n), halfwidth)


def region_masks(mesh: Mesh, r_inner: float = 0.95,
                 r_contrast: float = 0.9) -> RegionMasks:
    """Centroid-based membership masks for the inner and contrast disks."""
    if not 0.0 < r_inner < 1.0:
        raise InvalidArgument(f"r_inner must be in (0, 1), got {r_inner}")
    if not 0.0 < r_contrast < r_inner:
        raise InvalidArgument(
            f"r_contrast must be in (0, r_inner), got {r_contrast}"
        )
    rad = np.linalg.norm(mesh.centroids(), axis=1)
    return RegionMasks(inner=rad < r_inner, contrast=rad < r_contrast,
                       r_inner=r_inner, r_contrast=r_contrast)


def refine_uniform(mesh: Mesh) -> tuple[Mesh, np.ndarray]:
    """Split every triangle into 4; returns (fine_mesh, parent) where
    parent[t_fine] is the coarse triangle index. Boundary edges split in
    two and inherit their tag."""
    nodes = list(map(tuple, mesh.nodes))
    midpoint = {}

    def mid(i, j):
        key = (i, j) if i < j else (j, i)
        m = midpoint.get(key)
        if m is None:
            m = len(nodes)
            midpoint[key] = m
            nodes.append(
                (
                    0.5 * (mesh.nodes[i, 0] + mesh.nodes[j, 0]),
                    0.5 * (mesh.nodes[i, 1] + mesh.nodes[j, 1]),
                )
            )
        return m

    tris = np.empty((4 * mesh.num_triangles, 3), dtype=np.int64)
    parent = np.repeat(np.arange(mesh.num_triangles), 4)
    for t, (v0, v1, v2) in enumerate(mesh.triangles):
        m01 = mid(v0, v1)
        m12 = mid(v1, v2)
        m02 = mid(v0, v2)
        tris[4 * t + 0] = (v0, m01, m02)
        tris[4 * t + 1] = (m01, v1, m12)
        tris[4 * t + 2] = (m02, m12, v2)
        tris[4 * t + 3] = (m01, m12, m02)

    edges = []
    tags = []
    for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        m = mid(i, j)
        edges.append((i, m))
        edges.append((m, j))
        tags.extend([tag, tag])

    # Node numbering differs from build_structured_mesh, so the fast
    # structured lookup does not apply to refined meshes.
    fine = Mesh(np.array(nodes), tris, np.array(edges), tags, subdivisions=None)
    return fine, parent
