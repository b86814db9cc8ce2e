"""Line-oriented text formats for meshes, fields, data and results.

Floats are written with repr (shortest round-trip), so every
writer/reader pair is exactly inverse on valid files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import MeshFormatError
from .fem import NodalField
from .harmonic import ReconstructionResult
from .mesh import BoundaryTag, Mesh, build_structured_mesh
from .rbz import RbzResult
from .reduced import ReducedSpace
from .synth import LaplacianBzData


def _fmt(x: float) -> str:
    return repr(float(x))


class _Lines:
    """Sequential reader with format-error context."""

    def __init__(self, path: Path):
        self.path = path
        self.lines = path.read_text().splitlines()
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise MeshFormatError(f"{self.path}: unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect_header(self, magic: str):
        line = self.next().split()
        if line != [magic, "1"]:
            raise MeshFormatError(
                f"{self.path}: expected header '{magic} 1', got {' '.join(line)!r}"
            )

    def keyed_int(self, key: str) -> int:
        parts = self.next().split()
        if len(parts) != 2 or parts[0] != key:
            raise MeshFormatError(f"{self.path}: expected '{key} <count>' line")
        try:
            return int(parts[1])
        except ValueError as exc:
            raise MeshFormatError(f"{self.path}: bad count in '{key}' line") from exc


# ---------------------------------------------------------------- mesh

def write_mesh(mesh: Mesh, path) -> None:
    path = Path(path)
    out = ["mrmesh 1", f"nodes {mesh.num_nodes}"]
    out.extend(f"{_fmt(x)} {_fmt(y)}" for x, y in mesh.nodes)
    out.append(f"triangles {mesh.num_triangles}")
    out.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    out.append(f"boundary {len(mesh.boundary_edges)}")
    out.extend(
        f"{i} {j} {tag}"
        for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags)
    )
    path.write_text("\n".join(out) + "\n")


def read_mesh(path) -> Mesh:
    rd = _Lines(Path(path))
    rd.expect_header("mrmesh")
    n_nodes = rd.keyed_int("nodes")
    nodes = np.empty((n_nodes, 2))
    for i in range(n_nodes):
        parts = rd.next().split()
        if len(parts) != 2:
            raise MeshFormatError(f"{rd.path}: node line {i} malformed")
        nodes[i] = [float(parts[0]), float(parts[1])]
    n_tris = rd.keyed_int("triangles")
    tris = np.empty((n_tris, 3), dtype=np.int64)
    for i in range(n_tris):
        parts = rd.next().split()
        if len(parts) != 3:
            raise MeshFormatError(f"{rd.path}: triangle line {i} malformed")
        tris[i] = [int(p) for p in parts]
    n_edges = rd.keyed_int("boundary")
    edges = np.empty((n_edges, 2), dtype=np.int64)
    tags = []
    valid = {t.value for t in BoundaryTag}
    for i in range(n_edges):
        parts = rd.next().split()
        if len(parts) != 3 or parts[2] not in valid:
            raise MeshFormatError(f"{rd.path}: boundary line {i} malformed")
        edges[i] = [int(parts[0]), int(parts[1])]
        tags.append(parts[2])
    mesh = Mesh(nodes, tris, edges, tags, subdivisions=_infer_subdivisions(
        nodes, tris))
    return mesh


def _infer_subdivisions(nodes: np.ndarray, tris: np.ndarray) -> int | None:
    n = round(math.sqrt(len(tris) / 2)) if len(tris) else 0
    if n < 1 or len(tris) != 2 * n * n or len(nodes) != (n + 1) ** 2:
        return None
    candidate = build_structured_mesh(n)
    if np.array_equal(candidate.nodes, nodes) and np.array_equal(
        candidate.triangles, tris
    ):
        return n
    return None


# --------------------------------------------------------------- fields

def write_nodal_field(field: NodalField, path) -> None:
    path = Path(path)
    out = ["mrfield 1", f"len {len(field.values)}"]
    out.extend(_fmt(v) for v in field.values)
    path.write_text("\n".join(out) + "\n")


def read_nodal_field(path, mesh: Mesh) -> NodalField:
    rd = _Lines(Path(path))
    rd.expect_header("mrfield")
    n = rd.keyed_int("len")
    if n != mesh.num_nodes:
        raise MeshFormatError(
            f"{rd.path}: field length {n} does not match mesh "
            f"({mesh.num_nodes} nodes)"
        )
    vals = np.array([float(rd.next()) for _ in range(n)])
    return NodalField(mesh, vals)


def write_tri_field(values: np.ndarray, path) -> None:
    values = np.asarray(values, dtype=np.float64)
    path = Path(path)
    out = ["mrtrifield 1", f"len {len(values)}"]
    out.extend(_fmt(v) for v in values)
    path.write_text("\n".join(out) + "\n")


def read_tri_field(path) -> np.ndarray:
    rd = _Lines(Path(path))
    rd.expect_header("mrtrifield")
    n = rd.keyed_int("len")
    return np.array([float(rd.next()) for _ in range(n)])


def write_tri_vec2(values: np.ndarray, path) -> None:
    values = np.asarray(values, dtype=np.float64)
    path = Path(path)
    out = ["mrtrivec 1", f"len {len(values)}"]
    out.extend(f"{_fmt(v[0])} {_fmt(v[1])}" for v in values)
    path.write_text("\n".join(out) + "\n")


def read_tri_vec2(path) -> np.ndarray:
    rd = _Lines(Path(path))
    rd.expect_header("mrtrivec")
    n = rd.keyed_int("len")
    out = np.empty((n, 2))
    for i in range(n):
        parts = rd.next().split()
        if len(parts) != 2:
            raise MeshFormatError(f"{rd.path}: vector line {i} malformed")
        out[i] = [float(parts[0]), float(parts[1])]
    return out


# ----------------------------------------------------------------- data

def write_data(data: LaplacianBzData, path) -> None:
    path = Path(path)
    seed = "none" if data.noise_seed is None else str(data.noise_seed)
    out = [
        "mrdata 1",
        f"triangles {len(data.lap1)}",
        f"noise {_fmt(data.noise_level)} {seed}",
    ]
    out.extend(
        f"{_fmt(a)} {_fmt(b)}" for a, b in zip(data.lap1, data.lap2)
    )
    path.write_text("\n".join(out) + "\n")


def read_data(path, mesh: Mesh) -> LaplacianBzData:
    rd = _Lines(Path(path))
    rd.expect_header("mrdata")
    n = rd.keyed_int("triangles")
    if n != mesh.num_triangles:
        raise MeshFormatError(
            f"{rd.path}: data has {n} triangles, mesh has {mesh.num_triangles}"
        )
    parts = rd.next().split()
    if len(parts) != 3 or parts[0] != "noise":
        raise MeshFormatError(f"{rd.path}: expected 'noise <level> <seed|none>'")
    level = float(parts[1])
    seed = None if parts[2] == "none" else int(parts[2])
    lap1 = np.empty(n)
    lap2 = np.empty(n)
    for i in range(n):
        vals = rd.next().split()
        if len(vals) != 2:
            raise MeshFormatError(f"{rd.path}: data line {i} malformed")
        lap1[i] = float(vals[0])
        lap2[i] = float(vals[1])
    return LaplacianBzData(mesh, lap1, lap2, noise_level=level, noise_seed=seed)


# -------------------------------------------------------- reduced space

def write_reduced_space(space: ReducedSpace, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_nodal_field(space.lifting, directory / "lifting.txt")
    names = []
    for i, b in enumerate(space.basis):
        name = f"basis_{i:03d}.txt"
        write_nodal_field(b, directory / name)
        names.append(name)
    out = ["mrspace 1", f"drive {space.drive}", f"dimension {space.dimension}",
           "lifting lifting.txt"]
    out.extend(f"basis {name}" for name in names)
    (directory / "space.txt").write_text("\n".join(out) + "\n")


def read_reduced_space(directory, mesh: Mesh) -> ReducedSpace:
    from .fem import h1_matrix

    directory = Path(directory)
    rd = _Lines(directory / "space.txt")
    rd.expect_header("mrspace")
    drive = rd.keyed_int("drive")
    dim = rd.keyed_int("dimension")
    parts = rd.next().split()
    if parts[0] != "lifting":
        raise MeshFormatError(f"{rd.path}: expected lifting line")
    lifting = read_nodal_field(directory / parts[1], mesh)
    basis = []
    for _ in range(dim):
        parts = rd.next().split()
        if parts[0] != "basis":
            raise MeshFormatError(f"{rd.path}: expected basis line")
        basis.append(read_nodal_field(directory / parts[1], mesh))
    gram = h1_matrix(mesh)
    gram_basis = [gram.matvec(b.values) for b in basis]
    return ReducedSpace(drive=drive, lifting=lifting, basis=basis,
                        _gram_basis=gram_basis)


# -------------------------------------------------------------- results

def write_result_manifest(result: ReconstructionResult | RbzResult,
                          algo: str, sigma_file: str, path) -> None:
    path = Path(path)
    out = [
        "mrresult 1",
        f"algo {algo}",
        f"status {result.status}",
        f"iterations {result.iterations}",
        f"forward_solves {result.forward_solves}",
        f"wall_ms {_fmt(result.wall_ms)}",
        f"final_diff {_fmt(result.final_diff)}",
        f"sigma_file {sigma_file}",
    ]
    if isinstance(result, RbzResult):
        out.append(f"basis_updates {result.basis_updates}")
        out.append(f"full_solves {result.full_solves}")
        out.append(f"n1 {result.n1}")
        out.append(f"n2 {result.n2}")
    for name in sorted(result.phase_ms):
        out.append(f"phase_{name}_ms {_fmt(result.phase_ms[name])}")
    path.write_text("\n".join(out) + "\n")


def read_manifest(path) -> dict[str, str]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split() != ["mrresult", "1"]:
        raise MeshFormatError(f"{path}: not a result manifest")
    out = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        key, _, value = line.partition(" ")
        out[key] = value
    return out


def write_iteration_csv(result: ReconstructionResult | RbzResult, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(result, RbzResult):
            writer.writerow(["n", "diff", "delta1", "delta2"])
            for n, diff, d1, d2 in result.estimator_log:
                writer.writerow([n, _fmt(diff),
                                 "" if math.isnan(d1) else _fmt(d1),
                                 "" if math.isnan(d2) else _fmt(d2)])
        else:
            writer.writerow(["n", "diff"])
            for n, diff in enumerate(result.diff_history, start=1):
                writer.writerow([n, _fmt(diff)])


# ---------------------------------------------------------- run manifest

def sha256_of(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_run_manifest(path, command: list[str], config: dict,
                       inputs: list, outputs: list, wall_ms: float,
                       status: str) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): sha256_of(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "wall_ms": wall_ms,
        "status": status,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
