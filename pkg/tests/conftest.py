import numpy as np
import pytest

from mrbz.harmonic import BzConfig, reconstruct_bz
from mrbz.mesh import region_masks, standard_mesh
from mrbz.rbz import RbzConfig, reconstruct_rbz
from mrbz.synth import (
    bump_phantom,
    pixels_to_nodal,
    shepp_logan,
    synthesize_laplacian_bz,
    synthesize_refined,
)


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, 0],
                                                             dtype=np.uint64)))


@pytest.fixture(scope="session")
def mesh32():
    return standard_mesh(32)


@pytest.fixture(scope="session")
def mesh64():
    return standard_mesh(64)


@pytest.fixture(scope="session")
def desk64(mesh64):
    """Desk-scale benchmark problem: low-contrast smooth phantom at n=64
    with data synthesized one refinement level up, solved by both
    algorithms."""
    import time

    t0 = time.perf_counter()
    masks = region_masks(mesh64)
    phantom = bump_phantom(260, 260)
    sigma_star = pixels_to_nodal(phantom, mesh64)
    data = synthesize_refined(mesh64, phantom, levels=1)
    result_bz = reconstruct_bz(mesh64, masks, data, BzConfig())
    elapsed_bz = time.perf_counter() - t0
    result_rbz = reconstruct_rbz(mesh64, masks, data, RbzConfig())
    return {
        "mesh": mesh64,
        "masks": masks,
        "phantom": phantom,
        "sigma_star": sigma_star,
        "data": data,
        "bz": result_bz,
        "rbz": result_rbz,
        "elapsed_bz_s": elapsed_bz,
    }


@pytest.fixture(scope="session")
def crime64(mesh64):
    """Inverse-crime Shepp-Logan problem at n=64 (data synthesized on the
    reconstruction mesh itself)."""
    masks = region_masks(mesh64)
    sigma_star = pixels_to_nodal(shepp_logan(260, 260), mesh64)
    data = synthesize_laplacian_bz(mesh64, sigma_star)
    return {"mesh": mesh64, "masks": masks, "sigma_star": sigma_star,
            "data": data}
