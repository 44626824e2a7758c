"""Reading and writing mixed-dimensional meshes as JSON.

Layout of a file (``format = "mdmesh"``, ``version = 1``)::

    {
      "format": "mdmesh", "version": 1, "ambient_dim": 3,
      "domain": {"min": [...], "max": [...]},          # optional
      "grids": [
        {"id": 0, "dim": 3, "name": "matrix", "parents": [],
         "nodes": [[x, y, z], ...],
         "face_nodes": [[n0, n1, n2, ...], ...],
         "cell_faces": [[[face, sign], ...], ...]},
        ...
      ],
      "edges": [
        {"high": 0, "low": 1, "map": [[face, cell, side], ...]},
        ...
      ]
    }

Nodes of a face of a 3D cell are listed in cyclic order. ``sign`` is +1
when the face normal, oriented by the node order, points out of the cell.
Faces on a lower-dimensional object must already be split: each such face
has a single neighbouring cell and appears in exactly one edge map.
"""
from __future__ import annotations

import json
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sps

from mdflow.errors import FormatError, NonConformingMesh, NonConsecutiveDims
from mdflow.geometry import compute_geometry
from mdflow.grid import Grid, GridBucket

FORMAT = "mdmesh"
VERSION = 1


def bucket_to_dict(bucket: GridBucket) -> Dict[str, Any]:
    """Serializable description of the topology and coordinates of ``bucket``."""
    grids = bucket.grids()
    ids = {id(g): i for i, g in enumerate(grids)}
    out: Dict[str, Any] = {"format": FORMAT, "version": VERSION, "ambient_dim": bucket.ambient_dim}
    if bucket.domain is not None:
        out["domain"] = {"min": [float(v) for v in bucket.domain[0]],
                         "max": [float(v) for v in bucket.domain[1]]}
    glist = []
    for i, g in enumerate(grids):
        ptr, idx = g.face_node_ptr, g.face_node_idx
        cf = g.cell_faces
        glist.append({
            "id": i,
            "dim": g.dim,
            "name": g.name,
            "parents": list(g.parents),
            "nodes": g.nodes.tolist(),
            "face_nodes": [idx[ptr[f]:ptr[f + 1]].tolist() for f in range(g.num_faces)],
            "cell_faces": [
                [[int(f), int(s)] for f, s in zip(cf.indices[cf.indptr[c]:cf.indptr[c + 1]],
                                                  cf.data[cf.indptr[c]:cf.indptr[c + 1]])]
                for c in range(g.num_cells)
            ],
        })
    out["grids"] = glist
    out["edges"] = [
        {
            "high": ids[id(e.high)],
            "low": ids[id(e.low)],
            "map": [[int(f), int(c), int(s)] for f, c, s in zip(e.faces, e.cells, e.sides)],
        }
        for e in bucket.edges()
    ]
    return out


def export_mesh(bucket: GridBucket, path) -> None:
    """Write ``bucket`` to ``path`` in the mdmesh JSON format."""
    with open(path, "w") as fh:
        json.dump(bucket_to_dict(bucket), fh, separators=(",", ":"))
        fh.write("\n")


def import_mesh(path, domain: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                tol: float = 1e-10) -> GridBucket:
    """Load a mixed-dimensional mesh and verify it.

    Parameters
    ----------
    path : str or Path
        mdmesh JSON file.
    domain : (min, max), optional
        Domain box used to tag outer boundary faces; defaults to the box in
        the file, then to the bounding box of the top-dimensional grid.
    tol : float
        Relative tolerance of the conformity checks.

    Raises
    ------
    FormatError
        Unreadable file, wrong schema or inconsistent incidences.
    NonConformingMesh
        A mapped face and its lower-dimensional cell do not coincide.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise FormatError(f"{path}: cannot read mesh ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    try:
        return bucket_from_dict(raw, domain, tol)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise FormatError(msg)


def _int_array(val, what: str) -> np.ndarray:
    try:
        arr = np.asarray(val)
    except ValueError:
        raise FormatError(f"{what}: ragged or malformed array") from None
    _require(arr.size == 0 or np.issubdtype(arr.dtype, np.integer), f"{what}: expected integers")
    return arr.astype(np.int64)


def _grid_from_dict(gd: Dict[str, Any], ambient_dim: int) -> Grid:
    _require(isinstance(gd, dict), "grid entries must be objects")
    gid = gd.get("id")
    what = f"grid {gid!r}"
    dim = gd.get("dim")
    _require(isinstance(dim, int) and 0 <= dim <= ambient_dim, f"{what}: invalid dim {dim!r}")
    try:
        nodes = np.asarray(gd.get("nodes"), dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"{what}: nodes must be a list of coordinates") from None
    _require(nodes.ndim == 2 and nodes.shape[1] == ambient_dim and nodes.shape[0] > 0,
             f"{what}: nodes must have shape (n, {ambient_dim})")
    _require(bool(np.all(np.isfinite(nodes))), f"{what}: non-finite coordinates")
    nn = nodes.shape[0]

    face_nodes = gd.get("face_nodes", [])
    cell_faces = gd.get("cell_faces")
    _require(isinstance(face_nodes, list) and isinstance(cell_faces, list),
             f"{what}: face_nodes and cell_faces must be lists")
    want = {1: 1, 2: 2}.get(dim)
    ptr = [0]
    idx: List[int] = []
    for f, fn in enumerate(face_nodes):
        arr = _int_array(fn, f"{what}, face {f}").ravel()
        _require(arr.size > 0, f"{what}, face {f}: no nodes")
        if want is not None:
            _require(arr.size == want, f"{what}, face {f}: needs {want} node(s)")
        elif dim == 3:
            _require(arr.size >= 3, f"{what}, face {f}: needs at least 3 nodes")
        _require(bool(np.all((arr >= 0) & (arr < nn))), f"{what}, face {f}: node index out of range")
        idx.extend(arr.tolist())
        ptr.append(len(idx))
    nf = len(face_nodes)

    rows, cols, vals = [], [], []
    for c, entries in enumerate(cell_faces):
        arr = _int_array(entries, f"{what}, cell {c}")
        if arr.size == 0:
            continue
        _require(arr.ndim == 2 and arr.shape[1] == 2, f"{what}, cell {c}: entries are [face, sign]")
        _require(bool(np.all((arr[:, 0] >= 0) & (arr[:, 0] < nf))),
                 f"{what}, cell {c}: face index out of range")
        _require(bool(np.all(np.abs(arr[:, 1]) == 1)), f"{what}, cell {c}: signs must be +1 or -1")
        _require(np.unique(arr[:, 0]).size == arr.shape[0], f"{what}, cell {c}: repeated face")
        rows.extend(arr[:, 0].tolist())
        cols.extend([c] * arr.shape[0])
        vals.extend(arr[:, 1].tolist())
    nc = len(cell_faces)
    _require(nc > 0, f"{what}: no cells")
    if dim == 0:
        _require(nc == 1 and nf == 0, f"{what}: 0D grids have one cell and no faces")
    cf = sps.csc_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(nf, nc))
    parents = gd.get("parents", [])
    _require(isinstance(parents, list) and all(isinstance(p, str) for p in parents),
             f"{what}: parents must be a list of names")
    name = gd.get("name", str(gid))
    _require(isinstance(name, str), f"{what}: name must be a string")
    g = Grid(dim, nodes, np.asarray(ptr), np.asarray(idx, dtype=np.int64), cf, name, parents)
    try:
        g.check_topology()
    except ValueError as exc:
        raise FormatError(f"{what}: {exc}") from None
    return g


def bucket_from_dict(raw: Dict[str, Any], domain=None, tol: float = 1e-10) -> GridBucket:
    """Build and verify a bucket from the dictionary form of an mdmesh file."""
    _require(isinstance(raw, dict), "top level must be an object")
    _require(raw.get("format") == FORMAT, f"not an {FORMAT} file")
    _require(raw.get("version") == VERSION, f"unsupported version {raw.get('version')!r}")
    N = raw.get("ambient_dim")
    _require(isinstance(N, int) and N in (1, 2, 3), f"invalid ambient_dim {N!r}")
    glist = raw.get("grids")
    _require(isinstance(glist, list) and len(glist) > 0, "no grids")

    grids: Dict[Any, Grid] = {}
    order: List[Grid] = []
    for gd in glist:
        g = _grid_from_dict(gd, N)
        gid = gd.get("id")
        _require(gid not in grids, f"duplicate grid id {gid!r}")
        grids[gid] = g
        order.append(g)
    top = [g for g in order if g.dim == N]
    _require(len(top) == 1, f"need exactly one grid of dimension {N}, found {len(top)}")

    if domain is None and "domain" in raw:
        d = raw["domain"]
        try:
            domain = (np.asarray(d["min"], dtype=float), np.asarray(d["max"], dtype=float))
        except (KeyError, TypeError, ValueError):
            raise FormatError("domain needs numeric min and max") from None
        _require(domain[0].shape == (N,) and domain[1].shape == (N,), "domain has wrong length")
    if domain is None:
        domain = (top[0].nodes.min(axis=0), top[0].nodes.max(axis=0))
    domain = (np.asarray(domain[0], dtype=float), np.asarray(domain[1], dtype=float))
    scale = float(np.max(domain[1] - domain[0]))

    for g in order:
        compute_geometry(g)

    edges = raw.get("edges", [])
    _require(isinstance(edges, list), "edges must be a list")
    specs = []
    mapped: Dict[int, np.ndarray] = {id(g): np.zeros(g.num_faces, dtype=np.int8) for g in order}
    for k, ed in enumerate(edges):
        _require(isinstance(ed, dict), f"edge {k}: must be an object")
        hi, lo = grids.get(ed.get("high")), grids.get(ed.get("low"))
        _require(hi is not None and lo is not None, f"edge {k}: unknown grid id")
        if hi.dim != lo.dim + 1:
            raise FormatError(f"edge {k}: " + str(NonConsecutiveDims(
                f"grids of dimension {hi.dim} and {lo.dim} are not consecutive")))
        m = _int_array(ed.get("map", []), f"edge {k}")
        _require(m.ndim == 2 and m.shape[1] == 3 and m.shape[0] > 0,
                 f"edge {k}: map entries are [face, cell, side]")
        faces, cells, sides = m[:, 0], m[:, 1], m[:, 2]
        _require(bool(np.all((faces >= 0) & (faces < hi.num_faces))), f"edge {k}: face out of range")
        _require(bool(np.all((cells >= 0) & (cells < lo.num_cells))), f"edge {k}: cell out of range")
        _require(bool(np.all(np.abs(sides) == 1)), f"edge {k}: sides must be +1 or -1")
        seen = mapped[id(hi)]
        _require(bool(np.all(seen[faces] == 0)) and np.unique(faces).size == faces.size,
                 f"edge {k}: a face is mapped more than once")
        seen[faces] = sides
        specs.append((hi, lo, faces, cells, sides))

    for hi, lo, faces, cells, sides in specs:
        if np.any(hi.num_face_cells()[faces] != 1):
            raise NonConformingMesh(f"{hi.name} -> {lo.name}: mapped faces must be split")
        gap = np.linalg.norm(hi.face_centers[faces] - lo.cell_centers[cells], axis=1)
        if np.any(gap > tol * scale):
            raise NonConformingMesh(
                f"{hi.name} -> {lo.name}: face and cell centroids differ by up to {gap.max():.3e}"
            )
        if lo.dim > 0:
            mismatch = np.abs(hi.face_areas[faces] - lo.cell_volumes[cells])
            if np.any(mismatch > tol * lo.cell_volumes[cells]):
                raise NonConformingMesh(f"{hi.name} -> {lo.name}: face and cell measures differ")

    bucket = GridBucket(N, domain)
    for g in order:
        side = mapped[id(g)]
        g.tags["fracture_faces"] = side != 0
        g.tags["face_side"] = side.copy()
        if g.dim > 0:
            single = (g.num_face_cells() == 1) & (side == 0)
            on_box = np.zeros(g.num_faces, dtype=bool)
            for ax in range(N):
                for val in (domain[0][ax], domain[1][ax]):
                    on_box |= np.abs(g.face_centers[:, ax] - val) <= tol * scale
            g.tags["domain_boundary_faces"] = single & on_box
            g.tags["tip_faces"] = single & ~on_box
        bucket.add_node(g)
    for hi, lo, faces, cells, sides in specs:
        try:
            bucket.add_edge(hi, lo, faces, cells, sides)
        except ValueError as exc:
            raise FormatError(f"{hi.name} -> {lo.name}: {exc}") from None
    return bucket

