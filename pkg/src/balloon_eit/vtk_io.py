"""Legacy ASCII VTK unstructured-grid export/import plus electrode sidecar.

Meshes are written as VTK DataFile 2.0 with tetra cells and integer
region labels as cell data; further per-element scalar fields (for
reconstructions) can be appended.  Electrode patches do not fit the VTK
cell model, so they travel in a sidecar text file:

    # electrode map v1
    # electrode <index> face <n0> <n1> <n2> owner <element>
    electrode 1 face 12 13 52 owner 340
    ...

Node and element ids are 0-based and refer to the VTK file's POINTS and
CELLS order.
"""

from __future__ import annotations

import numpy as np

from .errors import MeshingError
from .meshing import Mesh

VTK_TETRA = 10


def write_vtk(path, mesh: Mesh, cell_fields: dict | None = None,
              title: str = "lumen mesh") -> None:
    """Write mesh (and optional per-element scalar fields) as legacy VTK."""
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_nodes} double\n")
        for p in mesh.nodes:
            f.write(f"{p[0]:.12g} {p[1]:.12g} {p[2]:.12g}\n")
        f.write(f"CELLS {mesh.n_elements} {5 * mesh.n_elements}\n")
        for el in mesh.elements:
            f.write(f"4 {el[0]} {el[1]} {el[2]} {el[3]}\n")
        f.write(f"CELL_TYPES {mesh.n_elements}\n")
        for _ in range(mesh.n_elements):
            f.write(f"{VTK_TETRA}\n")
        f.write(f"CELL_DATA {mesh.n_elements}\n")
        f.write("SCALARS region int 1\nLOOKUP_TABLE default\n")
        for r in mesh.element_region:
            f.write(f"{int(r)}\n")
        for name, values in (cell_fields or {}).items():
            values = np.asarray(values, dtype=float)
            if len(values) != mesh.n_elements:
                raise MeshingError(f"cell field {name!r} length mismatch")
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in values:
                f.write(f"{v:.12e}\n")


def write_electrode_map(path, mesh: Mesh) -> None:
    with open(path, "w") as f:
        f.write("# electrode map v1\n")
        f.write("# electrode <index> face <n0> <n1> <n2> owner <element>\n")
        for k, (faces, owners) in enumerate(zip(mesh.electrodes, mesh.electrode_owners), 1):
            for face, owner in zip(faces, owners):
                f.write(f"electrode {k} face {face[0]} {face[1]} {face[2]} "
                        f"owner {owner}\n")


def write_mesh(path_vtk, path_electrodes, mesh: Mesh,
               cell_fields: dict | None = None) -> None:
    write_vtk(path_vtk, mesh, cell_fields)
    write_electrode_map(path_electrodes, mesh)


def _expect(tokens, want, context):
    if not tokens or tokens[0].upper() != want:
        raise MeshingError(f"malformed VTK file: expected {want} in {context}")


def read_vtk(path) -> tuple[Mesh, dict]:
    """Read a legacy VTK tetra mesh; returns (mesh, cell_fields).

    The mesh comes back without electrode patches; pair with
    `read_electrode_map`.
    """
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    i = 0
    if not lines[i].startswith("# vtk DataFile"):
        raise MeshingError("not a legacy VTK file")
    i += 2  # header comment and title
    if lines[i].upper() != "ASCII":
        raise MeshingError("only ASCII VTK is supported")
    i += 1
    if lines[i].upper() != "DATASET UNSTRUCTURED_GRID":
        raise MeshingError("only unstructured grids are supported")
    i += 1

    tok = lines[i].split()
    _expect(tok, "POINTS", "points header")
    n_pts = int(tok[1])
    i += 1
    vals = []
    while len(vals) < 3 * n_pts:
        vals.extend(float(v) for v in lines[i].split())
        i += 1
    nodes = np.array(vals).reshape(n_pts, 3)

    tok = lines[i].split()
    _expect(tok, "CELLS", "cells header")
    n_cells = int(tok[1])
    i += 1
    cells = []
    for _ in range(n_cells):
        parts = [int(v) for v in lines[i].split()]
        if parts[0] != 4:
            raise MeshingError("only tetra cells are supported")
        cells.append(parts[1:5])
        i += 1
    elements = np.array(cells, dtype=np.int64)

    tok = lines[i].split()
    _expect(tok, "CELL_TYPES", "cell types header")
    i += 1
    for _ in range(n_cells):
        if int(lines[i]) != VTK_TETRA:
            raise MeshingError("only tetra cells are supported")
        i += 1

    region = np.ones(n_cells, dtype=np.int32)
    fields: dict = {}
    if i < len(lines) and lines[i].upper().startswith("CELL_DATA"):
        i += 1
        while i < len(lines) and lines[i].upper().startswith("SCALARS"):
            name = lines[i].split()[1]
            i += 2  # skip LOOKUP_TABLE line
            vals = []
            while len(vals) < n_cells:
                vals.extend(float(v) for v in lines[i].split())
                i += 1
            if name == "region":
                region = np.array(vals, dtype=np.int32)
            else:
                fields[name] = np.array(vals)

    mesh = Mesh(
        nodes=nodes,
        elements=elements,
        element_region=region,
        electrodes=[],
        electrode_owners=[],
        characteristic_size=float("nan"),
    )
    return mesh, fields


def read_electrode_map(path, mesh: Mesh) -> None:
    """Attach electrode patches from a sidecar file to an imported mesh."""
    groups: dict[int, list] = {}
    owners: dict[int, list] = {}
    with open(path) as f:
        for ln in f:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            tok = ln.split()
            if len(tok) != 8 or tok[0] != "electrode" or tok[2] != "face" or tok[6] != "owner":
                raise MeshingError(f"malformed electrode map line: {ln!r}")
            k = int(tok[1])
            groups.setdefault(k, []).append([int(tok[3]), int(tok[4]), int(tok[5])])
            owners.setdefault(k, []).append(int(tok[7]))
    if not groups:
        raise MeshingError("electrode map holds no electrodes")
    indices = sorted(groups)
    if indices != list(range(1, len(indices) + 1)):
        raise MeshingError(f"electrode indices must be 1..N, found {indices}")
    mesh.electrodes = [np.array(groups[k], dtype=np.int64) for k in indices]
    mesh.electrode_owners = [np.array(owners[k], dtype=np.int64) for k in indices]


def read_mesh(path_vtk, path_electrodes) -> Mesh:
    mesh, _ = read_vtk(path_vtk)
    read_electrode_map(path_electrodes, mesh)
    mesh.validate()
    return mesh
