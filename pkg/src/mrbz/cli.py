"""Command line interface: synth | reconstruct | render | metrics | selftest.

Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical failure,
4 iteration cap reached.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio
from .errors import MeshFormatError, MrbzError
from .fem import NodalField
from .harmonic import STATUS_MAX_ITERATIONS, BzConfig, reconstruct_bz
from .mesh import region_masks, standard_mesh
from .metrics import mask_nodes, rel_c_error
from .rbz import RbzConfig, reconstruct_rbz
from .render import render_field
from .synth import (
    add_relative_noise,
    bump_phantom,
    constant_phantom,
    pixels_to_nodal,
    shepp_logan,
    synthesize_laplacian_bz,
    synthesize_refined,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3
EXIT_MAX_ITERATIONS = 4


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise _UsageExit()


def _build_parser() -> _Parser:
    parser = _Parser(prog="mrbz", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate mesh, phantom and data")
    p_synth.add_argument("--n", type=int, required=True,
                         help="grid subdivisions per axis")
    p_synth.add_argument("--phantom", default="shepp-logan",
                         choices=["shepp-logan", "constant", "bump"])
    p_synth.add_argument("--px", type=int, default=260,
                         help="phantom pixel resolution")
    p_synth.add_argument("--offset", type=float, default=1.0)
    p_synth.add_argument("--value", type=float, default=1.0,
                         help="constant phantom value")
    p_synth.add_argument("--amplitude", type=float, default=0.3,
                         help="bump phantom amplitude")
    p_synth.add_argument("--halfwidth", type=float, default=0.1,
                         help="electrode half width")
    p_synth.add_argument("--noise", type=float, default=0.0,
                         help="relative noise level (0 disables)")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--mu0", type=float, default=1.0)
    p_synth.add_argument("--inverse-crime", action="store_true",
                         help="synthesize on the reconstruction mesh itself")
    p_synth.add_argument("--refine-levels", type=int, default=1)
    p_synth.add_argument("--tol", type=float, default=1e-10)
    p_synth.add_argument("--threads", type=int, default=1)
    p_synth.add_argument("--out-dir", default=".")

    p_rec = sub.add_parser("reconstruct", help="run a reconstruction")
    p_rec.add_argument("--algo", required=True, choices=["bz", "rbz"])
    p_rec.add_argument("--mesh", required=True)
    p_rec.add_argument("--data", required=True)
    p_rec.add_argument("--epsilon", type=float, default=1e-6,
                       help="termination tolerance (bz)")
    p_rec.add_argument("--epsilon1", type=float, default=1e-6,
                       help="global tolerance (rbz)")
    p_rec.add_argument("--epsilon2", type=float, default=1e-3,
                       help="estimator trust tolerance (rbz)")
    p_rec.add_argument("--trust", default="min", choices=["min", "max"])
    p_rec.add_argument("--max-iter", type=int, default=100)
    p_rec.add_argument("--mu0", type=float, default=1.0)
    p_rec.add_argument("--sigma-b", type=float, default=1.0)
    p_rec.add_argument("--r-inner", type=float, default=0.95)
    p_rec.add_argument("--r-contrast", type=float, default=0.9)
    p_rec.add_argument("--det-floor", type=float, default=1e-12)
    p_rec.add_argument("--det-fallback", default="error",
                       choices=["error", "zero"])
    p_rec.add_argument("--solver-tol", type=float, default=1e-10)
    p_rec.add_argument("--threads", type=int, default=1)
    p_rec.add_argument("--out-dir", default=".")

    p_ren = sub.add_parser("render", help="rasterize a field to PGM")
    p_ren.add_argument("field")
    p_ren.add_argument("--mesh", required=True)
    p_ren.add_argument("-o", "--out", required=True)
    p_ren.add_argument("--size", default="520x520",
                       help="WIDTHxHEIGHT, default 520x520")
    p_ren.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))

    p_met = sub.add_parser("metrics", help="nodal max-norm error report")
    p_met.add_argument("fields", nargs="+")
    p_met.add_argument("--reference", required=True)
    p_met.add_argument("--mesh", required=True)
    p_met.add_argument("--region", default="all",
                       choices=["all", "inner", "contrast"])
    p_met.add_argument("--r-inner", type=float, default=0.95)
    p_met.add_argument("--r-contrast", type=float, default=0.9)
    p_met.add_argument("--format", default="json", choices=["json", "csv"])
    p_met.add_argument("-o", "--out", default=None)

    sub.add_parser("selftest", help="run the built-in invariant checks")
    return parser


def _cmd_synth(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh = standard_mesh(args.n, halfwidth=args.halfwidth)

    if args.phantom == "shepp-logan":
        phantom = shepp_logan(args.px, args.px, offset=args.offset)
    elif args.phantom == "bump":
        phantom = bump_phantom(args.px, args.px, amplitude=args.amplitude,
                               offset=args.offset)
    else:
        phantom = constant_phantom(args.px, args.px, value=args.value)

    sigma_star = pixels_to_nodal(phantom, mesh)
    if args.inverse_crime:
        data = synthesize_laplacian_bz(mesh, sigma_star, mu0=args.mu0,
                                       tol=args.tol, threads=args.threads)
    else:
        data = synthesize_refined(mesh, phantom, levels=args.refine_levels,
                                  mu0=args.mu0, tol=args.tol,
                                  threads=args.threads)

    outputs = []
    mesh_file = out_dir / "mesh.txt"
    fileio.write_mesh(mesh, mesh_file)
    outputs.append(mesh_file)
    sigma_file = out_dir / "sigma_star.txt"
    fileio.write_nodal_field(sigma_star, sigma_file)
    outputs.append(sigma_file)
    data_file = out_dir / "data.txt"
    fileio.write_data(data, data_file)
    outputs.append(data_file)
    if args.noise > 0:
        noisy = add_relative_noise(data, level=args.noise, seed=args.seed)
        noisy_file = out_dir / "data_noisy.txt"
        fileio.write_data(noisy, noisy_file)
        outputs.append(noisy_file)

    fileio.write_run_manifest(
        out_dir / "run_manifest.json",
        command=getattr(args, "command_line", ["synth"]),
        config={k: v for k, v in vars(args).items()
                if k not in ("command", "command_line")},
        inputs=[],
        outputs=outputs,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        status="ok",
    )
    for p in outputs:
        print(p)
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh = fileio.read_mesh(args.mesh)
    data = fileio.read_data(args.data, mesh)
    masks = region_masks(mesh, r_inner=args.r_inner, r_contrast=args.r_contrast)
    log_b = float(np.log(args.sigma_b))

    if args.algo == "bz":
        cfg = BzConfig(
            epsilon=args.epsilon, mu0=args.mu0, max_iterations=args.max_iter,
            det_floor=args.det_floor, boundary_log_value=log_b,
            det_fallback=args.det_fallback, solver_tol=args.solver_tol,
            threads=args.threads,
        )
        result = reconstruct_bz(mesh, masks, data, cfg)
    else:
        cfg = RbzConfig(
            epsilon1=args.epsilon1, epsilon2=args.epsilon2,
            trust_criterion=args.trust, mu0=args.mu0,
            max_iterations=args.max_iter, det_floor=args.det_floor,
            boundary_log_value=log_b, det_fallback=args.det_fallback,
            solver_tol=args.solver_tol, threads=args.threads,
        )
        result = reconstruct_rbz(mesh, masks, data, cfg)

    sigma_file = out_dir / f"sigma_{args.algo}.txt"
    fileio.write_nodal_field(result.sigma, sigma_file)
    manifest_file = out_dir / f"result_{args.algo}.txt"
    fileio.write_result_manifest(result, args.algo, sigma_file.name,
                                 manifest_file)
    csv_file = out_dir / f"iterations_{args.algo}.csv"
    fileio.write_iteration_csv(result, csv_file)
    fileio.write_run_manifest(
        out_dir / f"run_manifest_{args.algo}.json",
        command=getattr(args, "command_line", ["reconstruct"]),
        config={k: v for k, v in vars(args).items()
                if k not in ("command", "command_line")},
        inputs=[args.mesh, args.data],
        outputs=[sigma_file, manifest_file, csv_file],
        wall_ms=(time.perf_counter() - t0) * 1e3,
        status=result.status,
    )
    print(manifest_file)
    print(f"status {result.status} iterations {result.iterations} "
          f"forward_solves {result.forward_solves}")
    if result.status == STATUS_MAX_ITERATIONS:
        return EXIT_MAX_ITERATIONS
    return EXIT_OK


def _cmd_render(args) -> int:
    mesh = fileio.read_mesh(args.mesh)
    field = fileio.read_nodal_field(args.field, mesh)
    try:
        width, height = (int(p) for p in args.size.lower().split("x"))
    except ValueError:
        print(f"error: bad --size {args.size!r}", file=sys.stderr)
        return EXIT_USAGE
    vmin, vmax = (args.range if args.range else (None, None))
    render_field(field, args.out, width=width, height=height,
                 vmin=vmin, vmax=vmax)
    print(args.out)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    mesh = fileio.read_mesh(args.mesh)
    reference = fileio.read_nodal_field(args.reference, mesh)
    masks = region_masks(mesh, r_inner=args.r_inner,
                         r_contrast=args.r_contrast)
    nodes = mask_nodes(mesh, masks, args.region)
    entries = []
    for path in args.fields:
        field = fileio.read_nodal_field(path, mesh)
        entries.append({
            "field": str(path),
            "reference": str(args.reference),
            "region": args.region,
            "relative_error": rel_c_error(field, reference, nodes),
        })
    if args.format == "json":
        text = json.dumps({"entries": entries}, indent=2) + "\n"
    else:
        lines = ["field,reference,region,relative_error"]
        lines += [f"{e['field']},{e['reference']},{e['region']},"
                  f"{e['relative_error']!r}" for e in entries]
        text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    raw = list(argv) if argv is not None else sys.argv[1:]
    try:
        args = parser.parse_args(raw)
    except _UsageExit:
        return EXIT_USAGE
    args.command_line = raw

    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "reconstruct":
            return _cmd_reconstruct(args)
        if args.command == "render":
            return _cmd_render(args)
        if args.command == "metrics":
            return _cmd_metrics(args)
        if args.command == "selftest":
            from .selftest import run_selftest

            return EXIT_OK if run_selftest() else EXIT_NUMERICAL
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MeshFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MrbzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
