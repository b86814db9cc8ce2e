"""Rasterize P1 fields to 8-bit binary PGM images.

Pixels are evaluated at their centers; the gray value is a linear map of
[vmin, vmax] onto 0..255 with round-half-up. Ties on the cell diagonal
evaluate in the below-diagonal triangle, which changes nothing for a
continuous P1 field and keeps the rule deterministic.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .fem import NodalField
from .mesh import Mesh


def _pixel_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    xs = -1.0 + (np.arange(width) + 0.5) * (2.0 / width)
    ys = 1.0 - (np.arange(height) + 0.5) * (2.0 / height)  # row 0 is y = +1
    return np.meshgrid(xs, ys)


def evaluate_on_grid(field: NodalField, width: int = 520,
                     height: int = 520) -> np.ndarray:
    """Point values of the field at pixel centers, shape (height, width)."""
    mesh = field.mesh
    x, y = _pixel_grid(width, height)
    if mesh.subdivisions is not None:
        return _evaluate_structured(field, x, y)
    return _evaluate_generic(field, x, y)


def _evaluate_structured(field: NodalField, x, y) -> np.ndarray:
    mesh = field.mesh
    n = mesh.subdivisions
    fx = np.clip((x + 1.0) * 0.5 * n, 0.0, n * (1 - 1e-16))
    fy = np.clip((y + 1.0) * 0.5 * n, 0.0, n * (1 - 1e-16))
    ix = np.minimum(fx.astype(np.int64), n - 1)
    iy = np.minimum(fy.astype(np.int64), n - 1)
    tx = fx - ix
    ty = fy - iy
    stride = n + 1
    a = field.values[iy * stride + ix]
    b = field.values[iy * stride + ix + 1]
    c = field.values[(iy + 1) * stride + ix + 1]
    d = field.values[(iy + 1) * stride + ix]
    lower = tx >= ty  # diagonal ties resolve to the lower-right triangle
    # P1 on (a,b,c): v = a + (b-a) tx + (c-b) ty ; on (a,c,d): mirrored
    vals_lower = a + (b - a) * tx + (c - b) * ty
    vals_upper = a + (c - d) * tx + (d - a) * ty
    return np.where(lower, vals_lower, vals_upper)


def _evaluate_generic(field: NodalField, x, y) -> np.ndarray:
    """Brute-force point location via a coarse triangle binning."""
    mesh = field.mesh
    shape = x.shape
    pts = np.column_stack([x.ravel(), y.ravel()])
    out = np.empty(len(pts))
    out.fill(np.nan)

    nbins = max(1, int(np.sqrt(mesh.num_triangles / 4)))
    corners = mesh.nodes[mesh.triangles]
    lo = corners.min(axis=1)
    hi = corners.max(axis=1)

    def to_bin(coords):
        return np.clip(((coords + 1.0) * 0.5 * nbins).astype(int), 0, nbins - 1)

    buckets: dict[tuple[int, int], list[int]] = {}
    blo = to_bin(lo)
    bhi = to_bin(hi)
    for t in range(mesh.num_triangles):
        for bx in range(blo[t, 0], bhi[t, 0] + 1):
            for by in range(blo[t, 1], bhi[t, 1] + 1):
                buckets.setdefault((bx, by), []).append(t)

    pb = to_bin(pts)
    for i, (px, py) in enumerate(pts):
        for t in buckets.get((pb[i, 0], pb[i, 1]), ()):
            v0, v1, v2 = mesh.triangles[t]
            p0 = mesh.nodes[v0]
            d1 = mesh.nodes[v1] - p0
            d2 = mesh.nodes[v2] - p0
            det = d1[0] * d2[1] - d1[1] * d2[0]
            rx, ry = px - p0[0], py - p0[1]
            l1 = (rx * d2[1] - ry * d2[0]) / det
            l2 = (d1[0] * ry - d1[1] * rx) / det
            if l1 >= -1e-12 and l2 >= -1e-12 and l1 + l2 <= 1 + 1e-12:
                vals = field.values[[v0, v1, v2]]
                out[i] = vals[0] * (1 - l1 - l2) + vals[1] * l1 + vals[2] * l2
                break
    if np.any(np.isnan(out)):
        raise InvalidArgument("some pixels fall outside the mesh")
    return out.reshape(shape)


def quantize(values: np.ndarray, vmin: float | None = None,
             vmax: float | None = None) -> np.ndarray:
    """Linear map of [vmin, vmax] to 0..255 with round-half-up; a
    degenerate range yields uniform mid-gray (128) with a warning."""
    lo = float(values.min()) if vmin is None else float(vmin)
    hi = float(values.max()) if vmax is None else float(vmax)
    if hi <= lo:
        print("warning: degenerate value range, rendering uniform mid-gray",
              file=sys.stderr)
        return np.full(values.shape, 128, dtype=np.uint8)
    t = (values - lo) / (hi - lo)
    return np.clip(np.floor(t * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_pgm(image: np.ndarray, path) -> None:
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise InvalidArgument("PGM image must be 2d")
    h, w = image.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5" or parts[3] != b"255":
        raise InvalidArgument(f"{path}: not an 8-bit binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def render_field(field: NodalField, path, width: int = 520, height: int = 520,
                 vmin: float | None = None, vmax: float | None = None) -> None:
    write_pgm(quantize(evaluate_on_grid(field, width, height), vmin, vmax),
              path)
