"""Synthetic data generation: conductivity phantoms, the per-triangle
Laplacian-of-Bz data, inverse-crime avoidance via mesh refinement, and
deterministic relative Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import shepp_logan as sl
from .errors import InvalidArgument
from .fem import NodalField, element_gradients
from .forward import DriveConfig, solve_forward
from .mesh import Mesh, refine_uniform


@dataclass
class PixelPhantom:
    """Pixel-center sampled conductivity on [-1,1]^2, grid shape (ny, nx)."""

    grid: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        if self.grid.ndim != 2 or self.grid.size == 0:
            raise InvalidArgument("phantom grid must be a non-empty 2d array")
        if not np.all(np.isfinite(self.grid)) or np.any(self.grid < 0):
            raise InvalidArgument("phantom values must be finite and >= 0")

    @property
    def nx(self) -> int:
        return self.grid.shape[1]

    @property
    def ny(self) -> int:
        return self.grid.shape[0]


@dataclass
class LaplacianBzData:
    """Per-triangle Laplacians of the two Bz channels plus noise metadata."""

    mesh: Mesh
    lap1: np.ndarray
    lap2: np.ndarray
    noise_level: float = 0.0
    noise_seed: int | None = None

    def __post_init__(self):
        self.lap1 = np.ascontiguousarray(self.lap1, dtype=np.float64)
        self.lap2 = np.ascontiguousarray(self.lap2, dtype=np.float64)
        t = self.mesh.num_triangles
        if self.lap1.shape != (t,) or self.lap2.shape != (t,):
            raise InvalidArgument("data length does not match triangle count")
        if not (np.all(np.isfinite(self.lap1)) and np.all(np.isfinite(self.lap2))):
            raise InvalidArgument("data contains non-finite values")

    def copy(self) -> "LaplacianBzData":
        return LaplacianBzData(self.mesh, self.lap1.copy(), self.lap2.copy(),
                               self.noise_level, self.noise_seed)


def _pixel_centers(count: int) -> np.ndarray:
    return -1.0 + (np.arange(count) + 0.5) * (2.0 / count)


def shepp_logan(nx: int, ny: int, offset: float = 1.0) -> PixelPhantom:
    """Classical ten-ellipse Shepp-Logan intensities at pixel centers,
    plus a constant offset that keeps the minimum at `offset`."""
    if nx < 1 or ny < 1:
        raise InvalidArgument("phantom needs at least one pixel per axis")
    x = _pixel_centers(nx)[None, :]
    y = _pixel_centers(ny)[:, None]
    grid = np.full((ny, nx), float(offset))
    for intensity, a, b, x0, y0, phi_deg in sl.ELLIPSES:
        phi = np.deg2rad(phi_deg)
        c, s = np.cos(phi), np.sin(phi)
        dx = x - x0
        dy = y - y0
        xr = c * dx + s * dy
        yr = -s * dx + c * dy
        inside = (xr / a) ** 2 + (yr / b) ** 2 <= 1.0
        grid += np.where(inside, intensity, 0.0)
    return PixelPhantom(grid)


def constant_phantom(nx: int, ny: int, value: float = 1.0) -> PixelPhantom:
    return PixelPhantom(np.full((ny, nx), float(value)))


def bump_phantom(nx: int, ny: int, amplitude: float = 0.3,
                 center: tuple[float, float] = (0.2, -0.1),
                 radius: float = 0.6, offset: float = 1.0) -> PixelPhantom:
    """Smooth low-contrast phantom: offset plus a compactly supported
    cos^2 bump, C^1 across its rim and constant near the boundary."""
    x = _pixel_centers(nx)[None, :]
    y = _pixel_centers(ny)[:, None]
    r = np.hypot(x - center[0], y - center[1])
    profile = np.where(r < radius,
                       np.cos(0.5 * np.pi * np.minimum(r / radius, 1.0)) ** 2,
                       0.0)
    return PixelPhantom(offset + amplitude * profile)


def pixels_to_nodal(phantom: PixelPhantom, mesh: Mesh) -> NodalField:
    """Bilinear sample of the pixel grid at mesh nodes.

    Pixel values live at pixel centers; coordinates beyond the outermost
    centers clamp to the edge value, so node values stay inside the
    phantom's range.
    """
    nx, ny = phantom.nx, phantom.ny
    fx = np.clip((mesh.nodes[:, 0] + 1.0) * 0.5 * nx - 0.5, 0.0, nx - 1.0)
    fy = np.clip((mesh.nodes[:, 1] + 1.0) * 0.5 * ny - 0.5, 0.0, ny - 1.0)
    ix0 = np.minimum(fx.astype(np.int64), nx - 1)
    iy0 = np.minimum(fy.astype(np.int64), ny - 1)
    ix1 = np.minimum(ix0 + 1, nx - 1)
    iy1 = np.minimum(iy0 + 1, ny - 1)
    tx = fx - ix0
    ty = fy - iy0
    g = phantom.grid
    vals = ((1 - tx) * (1 - ty) * g[iy0, ix0]
            + tx * (1 - ty) * g[iy0, ix1]
            + (1 - tx) * ty * g[iy1, ix0]
            + tx * ty * g[iy1, ix1])
    return NodalField(mesh, vals)


def synthesize_laplacian_bz(mesh: Mesh, sigma_star: NodalField,
                            mu0: float = 1.0, tol: float = 1e-10,
                            threads: int = 1) -> LaplacianBzData:
    """Per-triangle Laplacian of Bz for both drives:
    lap_j = mu0 * (d(sigma)/dx * d(u_j)/dy - d(sigma)/dy * d(u_j)/dx)."""
    grad_sigma = element_gradients(mesh, sigma_star)
    laps = []
    us = _solve_both_drives(mesh, sigma_star, tol, threads)
    for u in us:
        gu = element_gradients(mesh, u)
        laps.append(mu0 * (grad_sigma[:, 0] * gu[:, 1]
                           - grad_sigma[:, 1] * gu[:, 0]))
    return LaplacianBzData(mesh, laps[0], laps[1])


def _solve_both_drives(mesh, sigma, tol, threads):
    drives = (DriveConfig(electrode_pair=1), DriveConfig(electrode_pair=2))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=2) as pool:
            futs = [pool.submit(solve_forward, mesh, sigma, d, tol)
                    for d in drives]
            return [f.result() for f in futs]
    return [solve_forward(mesh, sigma, d, tol) for d in drives]


def aggregate_to_parent(values: np.ndarray, fine_areas: np.ndarray,
                        parent: np.ndarray, num_coarse: int) -> np.ndarray:
    """Area-weighted average of per-fine-triangle values onto their
    coarse parents; reproduces constants exactly."""
    weights = np.zeros(num_coarse)
    np.add.at(weights, parent, fine_areas)
    acc = np.zeros(num_coarse)
    np.add.at(acc, parent, fine_areas * np.asarray(values, dtype=np.float64))
    return acc / weights


def synthesize_refined(mesh: Mesh, sigma_star_pixels: PixelPhantom,
                       levels: int = 1, mu0: float = 1.0,
                       tol: float = 1e-10, threads: int = 1) -> LaplacianBzData:
    """Synthesize on a `levels`-times uniformly refined mesh, then
    aggregate per coarse triangle by area-weighted averaging. Avoids the
    inverse crime of generating data with the reconstruction mesh."""
    if levels < 1:
        raise InvalidArgument(f"levels must be >= 1, got {levels}")
    fine = mesh
    parent = np.arange(mesh.num_triangles)
    for _ in range(levels):
        fine, step = refine_uniform(fine)
        parent = parent[step]
    sigma_fine = pixels_to_nodal(sigma_star_pixels, fine)
    data_fine = synthesize_laplacian_bz(fine, sigma_fine, mu0=mu0, tol=tol,
                                        threads=threads)
    lap1 = aggregate_to_parent(data_fine.lap1, fine.areas, parent,
                               mesh.num_triangles)
    lap2 = aggregate_to_parent(data_fine.lap2, fine.areas, parent,
                               mesh.num_triangles)
    return LaplacianBzData(mesh, lap1, lap2)


def add_relative_noise(data: LaplacianBzData, level: float = 0.1,
                       seed: int = 0) -> LaplacianBzData:
    """Triangle-wise relative Gaussian noise.

    out = in + level * ref * g with g standard normal; ref is |in| where
    in is nonzero, else the channel's mean absolute value. Draws come
    from a counter-based Philox stream keyed by (seed, channel) and are
    converted with Box-Muller in fixed order, so results are
    reproducible independent of threading.
    """
    if level < 0:
        raise InvalidArgument(f"noise level must be >= 0, got {level}")
    if level == 0:
        out = data.copy()
        out.noise_level = 0.0
        out.noise_seed = int(seed)
        return out
    channels = []
    for channel, lap in ((1, data.lap1), (2, data.lap2)):
        gen = np.random.Generator(
            np.random.Philox(key=np.array([seed, channel], dtype=np.uint64))
        )
        u1 = gen.random(lap.size)
        u2 = gen.random(lap.size)
        g = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
        ref = np.abs(lap)
        zero = ref == 0.0
        ref[zero] = np.mean(np.abs(lap))
        channels.append(lap + level * ref * g)
    return LaplacianBzData(data.mesh, channels[0], channels[1],
                           noise_level=float(level), noise_seed=int(seed))
