"""Full-resolution reproduction runs (n=260, 135200 elements).

Deselected by default; run with `pytest -m fullscale`. Budgets are
minutes-scale. Tolerances acknowledge that the reference experiment used
a different data solver and an unspecified phantom variant; the wall
clock comparison is reported but not gated.
"""

import time

import numpy as np
import pytest

from mrbz.harmonic import BzConfig, reconstruct_bz
from mrbz.mesh import region_masks, standard_mesh
from mrbz.rbz import RbzConfig, compare_runs, reconstruct_rbz
from mrbz.synth import (
    add_relative_noise,
    pixels_to_nodal,
    shepp_logan,
    synthesize_refined,
)

pytestmark = pytest.mark.fullscale


@pytest.fixture(scope="module")
def fullscale():
    mesh = standard_mesh(260)
    masks = region_masks(mesh)
    phantom = shepp_logan(260, 260)
    sigma_star = pixels_to_nodal(phantom, mesh)
    data = synthesize_refined(mesh, phantom, levels=1)
    noisy = add_relative_noise(data, level=0.1, seed=7)
    results = {}
    for label, d in (("clean", data), ("noisy", noisy)):
        t0 = time.perf_counter()
        res_bz = reconstruct_bz(mesh, masks, d, BzConfig())
        t1 = time.perf_counter()
        res_rbz = reconstruct_rbz(mesh, masks, d, RbzConfig())
        t2 = time.perf_counter()
        results[label] = {
            "bz": res_bz, "rbz": res_rbz,
            "bz_s": t1 - t0, "rbz_s": t2 - t1,
        }
    return {"mesh": mesh, "masks": masks, "sigma_star": sigma_star,
            **results}


def rel_c(a, b):
    return float(np.abs(a - b).max() / np.abs(b).max())


def test_fullscale_element_count(fullscale):
    assert fullscale["mesh"].num_triangles == 135200


def test_fullscale_bz_accuracy_and_iterations(fullscale):
    res = fullscale["clean"]["bz"]
    err = rel_c(fullscale["sigma_star"].values, res.sigma.values)
    print(f"[fullscale] bz: {res.iterations} iterations, "
          f"{res.forward_solves} solves, error {err:.4f}, "
          f"{fullscale['clean']['bz_s']:.0f}s")
    assert res.status == "converged"
    assert abs(err - 0.092) <= 0.05
    assert abs(res.iterations - 14) <= 6


def test_fullscale_rbz_effort(fullscale):
    res = fullscale["clean"]["rbz"]
    print(f"[fullscale] rbz: {res.iterations} iterations, "
          f"{res.basis_updates} updates, {res.full_solves} full solves, "
          f"N=({res.n1},{res.n2}), {fullscale['clean']['rbz_s']:.0f}s")
    assert res.status == "converged"
    assert res.basis_updates <= 8
    assert res.full_solves <= 16
    assert res.full_solves < fullscale["clean"]["bz"].forward_solves


def test_fullscale_agreement(fullscale):
    gap = rel_c(fullscale["clean"]["rbz"].sigma.values,
                fullscale["clean"]["bz"].sigma.values)
    report = compare_runs(fullscale["clean"]["bz"], fullscale["clean"]["rbz"],
                          fullscale["sigma_star"])
    print(f"[fullscale] rbz-vs-bz gap {gap:.2e}, "
          f"wall speedup {report.speedup_pct:.0f}% (reported, not gated)")
    assert gap <= 1e-2


def test_fullscale_noisy_agreement(fullscale):
    gap = rel_c(fullscale["noisy"]["rbz"].sigma.values,
                fullscale["noisy"]["bz"].sigma.values)
    print(f"[fullscale] noisy rbz-vs-bz gap {gap:.2e}")
    assert gap <= 1e-2


def test_fullscale_noisy_error_band(fullscale):
    # lands slightly above the documented band for every seed tried
    # (0.20-0.22 across seeds 0,1,2,3,7 at levels=1; 0.19-0.21 at
    # levels=2): the overshoot tracks the clean-run baseline offset from
    # the different data pipeline and is reported honestly here
    res = fullscale["noisy"]["bz"]
    err = rel_c(fullscale["sigma_star"].values, res.sigma.values)
    print(f"[fullscale] noisy bz error {err:.4f} (band 0.13 +- 0.07)")
    assert abs(err - 0.13) <= 0.07
