"""Legacy ASCII VTK output of cell fields, one file per dimension."""
from __future__ import annotations

import weakref
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from mdflow.grid import Grid

VTK_VERTEX = 1
VTK_LINE = 3
VTK_TRIANGLE = 5
VTK_POLYGON = 7
VTK_QUAD = 9
VTK_TETRA = 10
VTK_HEXAHEDRON = 12
VTK_CONVEX_POINT_SET = 41


def _cycle(edges: List[Tuple[int, int]]) -> List[int]:
    """Order the nodes of a closed loop given as unordered edges."""
    nbrs: Dict[int, List[int]] = {}
    for a, b in edges:
        nbrs.setdefault(a, []).append(b)
        nbrs.setdefault(b, []).append(a)
    start = edges[0][0]
    loop, prev, cur = [start], None, start
    while True:
        nxt = [n for n in nbrs[cur] if n != prev]
        if not nxt or nxt[0] == start:
            break
        prev, cur = cur, nxt[0]
        loop.append(cur)
    return loop


def _polygon(g: Grid, c: int) -> Tuple[int, List[int]]:
    faces, _ = g.faces_of_cell(c)
    loop = _cycle([tuple(g.nodes_of_face(f)) for f in faces])
    # counter-clockwise in the tangent plane
    X = g.to_local(g.nodes[loop] - g.cell_centers[c])
    area = 0.5 * np.sum(X[:, 0] * np.roll(X[:, 1], -1) - np.roll(X[:, 0], -1) * X[:, 1])
    if area < 0:
        loop = loop[::-1]
    kind = {3: VTK_TRIANGLE, 4: VTK_QUAD}.get(len(loop), VTK_POLYGON)
    return kind, loop


def _polyhedron(g: Grid, c: int) -> Tuple[int, List[int]]:
    faces, _ = g.faces_of_cell(c)
    face_nodes = [list(g.nodes_of_face(f)) for f in faces]
    nodes = sorted({n for fn in face_nodes for n in fn})
    xc = g.cell_centers[c]
    if len(faces) == 4 and len(nodes) == 4:
        p = g.nodes[nodes]
        if np.linalg.det(np.array([p[1] - p[0], p[2] - p[0], p[3] - p[0]])) < 0:
            nodes[1], nodes[2] = nodes[2], nodes[1]
        return VTK_TETRA, nodes
    if len(faces) == 6 and len(nodes) == 8 and all(len(fn) == 4 for fn in face_nodes):
        bottom = face_nodes[0]
        p = g.nodes[bottom]
        if np.cross(p[1] - p[0], p[3] - p[0]) @ (xc - p[0]) < 0:
            bottom = bottom[::-1]
        edges = set()
        for fn in face_nodes:
            for a, b in zip(fn, fn[1:] + fn[:1]):
                edges.add((a, b))
                edges.add((b, a))
        top = []
        for n in bottom:
            up = [m for m in nodes if (n, m) in edges and m not in bottom]
            if len(up) != 1:
                break
            top.append(up[0])
        else:
            return VTK_HEXAHEDRON, bottom + top
    return VTK_CONVEX_POINT_SET, nodes


_CONNECTIVITY: "weakref.WeakKeyDictionary[Grid, tuple]" = weakref.WeakKeyDictionary()


def cell_connectivity(g: Grid) -> Tuple[np.ndarray, List[List[int]]]:
    """VTK cell types and node lists of every cell of ``g`` (cached per grid)."""
    if g in _CONNECTIVITY:
        return _CONNECTIVITY[g]
    types = np.zeros(g.num_cells, dtype=np.int64)
    conn: List[List[int]] = []
    for c in range(g.num_cells):
        if g.dim == 0:
            kind, nodes = VTK_VERTEX, [0]
        elif g.dim == 1:
            faces, _ = g.faces_of_cell(c)
            kind, nodes = VTK_LINE, [int(g.nodes_of_face(f)[0]) for f in faces]
        elif g.dim == 2:
            kind, nodes = _polygon(g, c)
        else:
            kind, nodes = _polyhedron(g, c)
        types[c] = kind
        conn.append([int(n) for n in nodes])
    _CONNECTIVITY[g] = (types, conn)
    return types, conn


def _fmt(x: float) -> str:
    return repr(float(x))


def write_vtk(path, grids: Sequence[Grid], cell_data: Mapping[str, Sequence[np.ndarray]],
              title: str = "mdflow") -> Path:
    """Write ``grids`` as one legacy ASCII unstructured grid.

    Parameters
    ----------
    path : str or Path
        Output file.
    grids : sequence of Grid
        Grids sharing a file; usually all grids of one dimension.
    cell_data : mapping
        Field name to one array per grid, shape (num_cells,) for scalars or
        (num_cells, ambient_dim) for vectors. Vectors are padded to three
        components.
    """
    path = Path(path)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID"]
    n_pts = sum(g.num_nodes for g in grids)
    lines.append(f"POINTS {n_pts} double")
    for g in grids:
        X = np.zeros((g.num_nodes, 3))
        X[:, : g.ambient_dim] = g.nodes
        lines.extend(" ".join(_fmt(v) for v in row) for row in X)

    all_types, all_conn = [], []
    offset = 0
    for g in grids:
        types, conn = cell_connectivity(g)
        all_types.append(types)
        all_conn.extend([n + offset for n in nodes] for nodes in conn)
        offset += g.num_nodes
    n_cells = len(all_conn)
    size = sum(len(c) + 1 for c in all_conn)
    lines.append(f"CELLS {n_cells} {size}")
    lines.extend(" ".join(str(v) for v in [len(c)] + c) for c in all_conn)
    lines.append(f"CELL_TYPES {n_cells}")
    for types in all_types:
        lines.extend(str(int(t)) for t in types)

    if cell_data:
        lines.append(f"CELL_DATA {n_cells}")
    for name, per_grid in cell_data.items():
        vals = [np.asarray(v, dtype=float) for v in per_grid]
        if len(vals) != len(grids):
            raise ValueError(f"field {name!r}: need one array per grid")
        if vals and vals[0].ndim == 2:
            lines.append(f"VECTORS {name} double")
            for v in vals:
                V = np.zeros((v.shape[0], 3))
                V[:, : v.shape[1]] = v
                lines.extend(" ".join(_fmt(x) for x in row) for row in V)
        else:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            for v in vals:
                lines.extend(_fmt(x) for x in v)
    path.write_text("\n".join(lines) + "\n")
    return path


def cell_velocity(g: Grid, discharge: np.ndarray, specific_volume: np.ndarray) -> np.ndarray:
    """Cell-wise Darcy velocity reconstructed from face discharges.

    ``u_E = sum_f sign |f| v u_f (x_f - x_E) / (|E| v)``, which is exact for
    constant velocity fields. Returned in ambient coordinates, shape
    (num_cells, ambient_dim); zero on 0D grids.
    """
    out = np.zeros((g.num_cells, g.ambient_dim))
    if g.dim == 0:
        return out
    cells, faces, signs = g.cell_face_pairs()
    terms = (signs * discharge[faces])[:, None] * (g.face_centers[faces] - g.cell_centers[cells])
    np.add.at(out, cells, terms)
    return out / (g.cell_volumes * specific_volume)[:, None]


def read_vtk_cell_data(path) -> Dict[str, np.ndarray]:
    """Parse the cell fields of a file written by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    out: Dict[str, np.ndarray] = {}
    n = None
    i = 0
    while i < len(tokens):
        line = tokens[i].split()
        if line and line[0] == "CELL_DATA":
            n = int(line[1])
        elif line and line[0] == "SCALARS" and n is not None:
            out[line[1]] = np.array([float(tokens[i + 2 + k]) for k in range(n)])
            i += 2 + n
            continue
        elif line and line[0] == "VECTORS" and n is not None:
            out[line[1]] = np.array([[float(x) for x in tokens[i + 1 + k].split()] for k in range(n)])
            i += 1 + n
            continue
        i += 1
    return out


def grid_files(directory, prefix: str, step: int, dims: Sequence[int]) -> Dict[int, Path]:
    """File names used for one output step, per dimension."""
    directory = Path(directory)
    return {d: directory / f"{prefix}_{d}d_{step:05d}.vtk" for d in dims}

