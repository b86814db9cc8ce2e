"""2D MREIT conductivity reconstruction toolkit.

Builds P1 finite element forward models for two electrode drives on a
structured square mesh, synthesizes Laplacian-of-Bz data, and recovers
the conductivity with a harmonic-Bz fixed point iteration or its
adaptive reduced-basis accelerated variant.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .fem import NodalField, constant_field
from .harmonic import BzConfig, ReconstructionResult, reconstruct_bz
from .mesh import (
    BoundaryTag,
    Mesh,
    RegionMasks,
    build_structured_mesh,
    region_masks,
    standard_mesh,
    tag_boundaries,
)
from .rbz import MetricsReport, RbzConfig, RbzResult, compare_runs, reconstruct_rbz
from .synth import (
    LaplacianBzData,
    PixelPhantom,
    add_relative_noise,
    bump_phantom,
    constant_phantom,
    pixels_to_nodal,
    shepp_logan,
    synthesize_laplacian_bz,
    synthesize_refined,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryTag",
    "BzConfig",
    "KERNEL_BACKEND",
    "LaplacianBzData",
    "Mesh",
    "MetricsReport",
    "NodalField",
    "PixelPhantom",
    "RbzConfig",
    "RbzResult",
    "ReconstructionResult",
    "RegionMasks",
    "add_relative_noise",
    "build_structured_mesh",
    "bump_phantom",
    "compare_runs",
    "constant_field",
    "constant_phantom",
    "pixels_to_nodal",
    "reconstruct_bz",
    "reconstruct_rbz",
    "region_masks",
    "shepp_logan",
    "standard_mesh",
    "synthesize_laplacian_bz",
    "synthesize_refined",
    "tag_boundaries",
]
