#!/usr/bin/env python3
"""Benchmark the compiled Cython kernels against the pure numpy fallback.

Kernel-level timings (CSR matvec and the full Jacobi-PCG loop) run both
backends in-process; the end-to-end figure re-runs one electrode forward
solve in a subprocess with MRBZ_KERNELS pinned, so the whole pipeline
uses the requested lane.

Usage: python benchmarks/bench_backends.py [--n 64 128 260] [--skip-e2e]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_benchmarks(n, backends):
    from mrbz.fem import assemble_stiffness, apply_dirichlet, constant_field, SparseSystem
    from mrbz.mesh import standard_mesh

    mesh = standard_mesh(n)
    sigma = constant_field(mesh, 1.0)
    matrix = assemble_stiffness(mesh, sigma)
    plus, minus = mesh.drive_nodes(1)
    system = apply_dirichlet(
        SparseSystem(matrix, np.zeros(mesh.num_nodes)),
        [(int(i), 1.0) for i in plus] + [(int(i), 0.0) for i in minus],
    )
    mat = system.matrix
    x = np.linspace(-1.0, 1.0, mesh.num_nodes)
    inv_diag = 1.0 / mat.diagonal()
    b = system.rhs

    rows = {}
    for name, mod in backends.items():
        t_mv = time_call(
            lambda: mod.csr_matvec(mat.indptr, mat.indices, mat.data, x),
            repeats=20,
        )
        t_pcg = time_call(
            lambda: mod.pcg_jacobi(mat.indptr, mat.indices, mat.data, b,
                                   np.zeros(mesh.num_nodes), inv_diag,
                                   1e-10, 10 * mesh.num_nodes),
            repeats=3,
        )
        iters = mod.pcg_jacobi(mat.indptr, mat.indices, mat.data, b,
                               np.zeros(mesh.num_nodes), inv_diag,
                               1e-10, 10 * mesh.num_nodes)[1]
        rows[name] = (t_mv, t_pcg, iters)
    return rows


def end_to_end(n, lane):
    code = (
        "import time, numpy as np\n"
        "from mrbz.mesh import standard_mesh\n"
        "from mrbz.fem import constant_field\n"
        "from mrbz.forward import DriveConfig, solve_forward\n"
        f"mesh = standard_mesh({n})\n"
        "sigma = constant_field(mesh, 1.0)\n"
        "t0 = time.perf_counter()\n"
        "solve_forward(mesh, sigma, DriveConfig(electrode_pair=1))\n"
        "print(time.perf_counter() - t0)\n"
    )
    env = dict(os.environ, MRBZ_KERNELS=lane)
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, nargs="+", default=[64, 128, 260])
    parser.add_argument("--skip-e2e", action="store_true")
    args = parser.parse_args()

    from mrbz._kernels import get_backend, pure

    backends = {"pure": pure}
    try:
        backends["compiled"] = get_backend("compiled")
    except ImportError:
        print("compiled kernels not built; benchmarking pure lane only")

    header = f"{'n':>5} {'backend':>9} {'matvec[ms]':>11} {'pcg[s]':>9} {'iters':>6}"
    print(header)
    print("-" * len(header))
    for n in args.n:
        rows = kernel_benchmarks(n, backends)
        for name, (t_mv, t_pcg, iters) in rows.items():
            print(f"{n:>5} {name:>9} {t_mv * 1e3:>11.3f} {t_pcg:>9.3f} "
                  f"{iters:>6}")
        if "compiled" in rows:
            speedup = rows["pure"][1] / rows["compiled"][1]
            print(f"{'':>5} (pcg speedup compiled vs pure: {speedup:.2f}x)")

    if not args.skip_e2e and "compiled" in backends:
        n = args.n[-1]
        print(f"\nend-to-end forward solve at n={n} (fresh process per lane):")
        for lane in ("pure", "compiled"):
            seconds = end_to_end(n, lane)
            print(f"  {lane:>9}: {seconds:.2f} s")


if __name__ == "__main__":
    main()
