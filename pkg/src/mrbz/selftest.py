"""Built-in smoke checks: invariants cheap enough to run on every install.

Each check returns quietly or raises AssertionError; `run_selftest`
prints one PASS/FAIL line per check and reports overall success.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .fem import (
    NodalField,
    SparseSystem,
    apply_dirichlet,
    assemble_stiffness,
    constant_field,
    element_gradients,
    solve_spd,
    unit_stiffness,
    weak_divergence_rhs,
)
from .fileio import (
    read_data,
    read_mesh,
    read_nodal_field,
    write_data,
    write_mesh,
    write_nodal_field,
)
from .forward import DriveConfig, electrode_flux, solve_forward
from .mesh import BoundaryTag, build_structured_mesh, region_masks, standard_mesh
from .synth import add_relative_noise, synthesize_laplacian_bz


def check_mesh_invariants():
    for n in (1, 2, 7, 32):
        mesh = build_structured_mesh(n)
        assert abs(mesh.areas.sum() - 4.0) < 1e-12, f"area sum off at n={n}"
        assert np.all(mesh.areas > 0)
    mesh = standard_mesh(32)
    assert len(mesh.boundary_edges) == 4 * 32
    counts = {t.value: int((mesh.boundary_tags == t.value).sum())
              for t in BoundaryTag}
    electrodes = [counts[t] for t in
                  ("E1plus", "E1minus", "E2plus", "E2minus")]
    assert len(set(electrodes)) == 1 and electrodes[0] > 0, counts
    masks = region_masks(mesh)
    assert np.all(masks.inner[masks.contrast])


def check_patch_test():
    mesh = standard_mesh(24)
    k = assemble_stiffness(mesh, constant_field(mesh, 3.7))
    linear = NodalField(mesh, 1.5 * mesh.nodes[:, 0] - 0.25 * mesh.nodes[:, 1] + 2)
    resid = k.matvec(linear.values)
    interior = np.setdiff1d(np.arange(mesh.num_nodes), mesh.boundary_nodes())
    assert np.abs(resid[interior]).max() < 1e-12, "patch test failed"


def check_weak_divergence_adjoint():
    mesh = standard_mesh(24)
    rng = np.random.Generator(np.random.Philox(key=np.array([5, 0], np.uint64)))
    w = NodalField(mesh, rng.standard_normal(mesh.num_nodes))
    lhs = weak_divergence_rhs(mesh, element_gradients(mesh, w))
    rhs = unit_stiffness(mesh).matvec(w.values)
    assert np.abs(lhs - rhs).max() < 1e-12, "weak divergence adjoint identity"


def check_flux_antisymmetry():
    mesh = standard_mesh(32)
    sigma = NodalField(mesh, 1.0 + 0.5 * np.exp(-np.sum(mesh.nodes**2, axis=1)))
    for pair, plus, minus in (
        (1, BoundaryTag.E1PLUS, BoundaryTag.E1MINUS),
        (2, BoundaryTag.E2PLUS, BoundaryTag.E2MINUS),
    ):
        u = solve_forward(mesh, sigma, DriveConfig(electrode_pair=pair))
        k = assemble_stiffness(mesh, sigma)
        f_plus = electrode_flux(mesh, sigma, u, plus, stiffness=k)
        f_minus = electrode_flux(mesh, sigma, u, minus, stiffness=k)
        assert f_plus > 0, "flux sign"
        assert abs(f_plus + f_minus) < 1e-8 * abs(f_plus), "flux antisymmetry"


def check_solver_oracle():
    rng = np.random.Generator(np.random.Philox(key=np.array([7, 0], np.uint64)))
    b_mat = rng.standard_normal((50, 50))
    dense = b_mat.T @ b_mat + 50 * np.eye(50)
    from .fem import CsrMatrix

    rows, cols = np.nonzero(dense)
    mat = CsrMatrix.from_coo(50, rows, cols, dense[rows, cols])
    b = rng.standard_normal(50)
    x = solve_spd(SparseSystem(mat, b.copy()), tol=1e-12)
    x_ref = np.linalg.solve(dense, b)
    assert np.abs(x - x_ref).max() < 1e-8, "PCG disagrees with dense solve"


def check_noise_determinism():
    mesh = standard_mesh(24)
    sigma = NodalField(mesh, 1.0 + 0.2 * mesh.nodes[:, 0] ** 2)
    data = synthesize_laplacian_bz(mesh, sigma)
    n1 = add_relative_noise(data, level=0.1, seed=123)
    n2 = add_relative_noise(data, level=0.1, seed=123)
    assert np.array_equal(n1.lap1, n2.lap1) and np.array_equal(n1.lap2, n2.lap2)
    n3 = add_relative_noise(data, level=0.1, seed=124)
    assert not np.array_equal(n1.lap1, n3.lap1), "seed has no effect"
    n0 = add_relative_noise(data, level=0.0, seed=123)
    assert np.array_equal(n0.lap1, data.lap1), "level 0 must be identity"


def check_file_roundtrips():
    mesh = standard_mesh(20)
    rng = np.random.Generator(np.random.Philox(key=np.array([9, 0], np.uint64)))
    field = NodalField(mesh, rng.standard_normal(mesh.num_nodes))
    sigma = NodalField(mesh, 1.0 + rng.random(mesh.num_nodes))
    data = add_relative_noise(synthesize_laplacian_bz(mesh, sigma), 0.05, 42)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        write_mesh(mesh, tmp / "m.txt")
        back = read_mesh(tmp / "m.txt")
        assert np.array_equal(back.nodes, mesh.nodes)
        assert np.array_equal(back.triangles, mesh.triangles)
        assert np.array_equal(back.boundary_tags, mesh.boundary_tags)
        assert back.subdivisions == 20
        write_nodal_field(field, tmp / "f.txt")
        assert np.array_equal(read_nodal_field(tmp / "f.txt", mesh).values,
                              field.values)
        write_data(data, tmp / "d.txt")
        back_data = read_data(tmp / "d.txt", mesh)
        assert np.array_equal(back_data.lap1, data.lap1)
        assert np.array_equal(back_data.lap2, data.lap2)
        assert back_data.noise_seed == 42


CHECKS = (
    ("mesh invariants (areas, tags, masks)", check_mesh_invariants),
    ("stiffness patch test", check_patch_test),
    ("weak divergence adjoint identity", check_weak_divergence_adjoint),
    ("electrode flux antisymmetry", check_flux_antisymmetry),
    ("PCG against dense factorization", check_solver_oracle),
    ("noise determinism", check_noise_determinism),
    ("file format round-trips", check_file_roundtrips),
)


def run_selftest(out=None) -> bool:
    import sys

    out = out or sys.stdout
    all_ok = True
    for name, fn in CHECKS:
        try:
            fn()
            print(f"[PASS] {name}", file=out)
        except Exception as exc:  # noqa: BLE001 - report and continue
            all_ok = False
            print(f"[FAIL] {name}: {exc}", file=out)
    return all_ok
