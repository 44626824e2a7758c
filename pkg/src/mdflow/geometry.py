"""Fracture networks, their intersections, conforming Cartesian meshing and
cell/face geometry.

Fractures are axis-aligned: rectangles in 3D, segments in 2D. Each is given
by its two opposite corners, with exactly one zero-extent coordinate (the
normal direction).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps

from mdflow.errors import (
    DegenerateCell,
    GeometryError,
    NonAxisAligned,
    NonConformingFracture,
    OverlappingFractures,
    TIntersection,
)
from mdflow.grid import Grid, GridBucket

_TOL = 1e-10


@dataclass(frozen=True)
class Fracture:
    """Axis-aligned fracture spanning the box ``[lo, hi]`` with one flat axis."""

    id: str
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError(f"fracture {self.id}: corners must have equal length")
        object.__setattr__(self, "lo", tuple(np.minimum(lo, hi)))
        object.__setattr__(self, "hi", tuple(np.maximum(lo, hi)))
        flat = self.extent <= _TOL * max(1.0, float(np.max(np.abs(hi))))
        if flat.sum() != 1:
            raise NonAxisAligned(
                f"fracture {self.id}: expected exactly one zero-extent axis, got {int(flat.sum())}"
            )

    @classmethod
    def from_vertices(cls, id: str, vertices) -> "Fracture":
        """Build from polygon vertices, which must span an axis-aligned box face."""
        pts = np.atleast_2d(np.asarray(vertices, dtype=float))
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        frac = cls(id, tuple(lo), tuple(hi))
        # every vertex must be a corner of the bounding rectangle
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        for p in pts:
            if np.min(np.linalg.norm(corners - p, axis=1)) > _TOL * (1 + np.abs(p).max()):
                raise NonAxisAligned(f"fracture {id}: vertex {p} is not a box corner")
        if pts.shape[0] != 2 ** (pts.shape[1] - 1):
            raise NonAxisAligned(f"fracture {id}: not a rectangle/segment")
        return frac

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def normal_axis(self) -> int:
        return int(np.argmin(self.extent))

    @property
    def offset(self) -> float:
        return self.lo[self.normal_axis]


@dataclass
class FractureNetwork:
    ambient_dim: int
    domain_min: Tuple[float, ...]
    domain_max: Tuple[float, ...]
    fractures: List[Fracture] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.domain_min = tuple(float(v) for v in self.domain_min)
        self.domain_max = tuple(float(v) for v in self.domain_max)
        self.validate()

    def validate(self) -> None:
        if self.ambient_dim not in (2, 3):
            raise GeometryError("ambient dimension must be 2 or 3")
        lo, hi = np.asarray(self.domain_min), np.asarray(self.domain_max)
        if lo.size != self.ambient_dim or hi.size != self.ambient_dim:
            raise GeometryError("domain corners do not match ambient dimension")
        if np.any(hi <= lo):
            raise GeometryError("domain box has non-positive extent")
        tol = _TOL * max(1.0, float(np.abs(hi - lo).max()))
        ids = [f.id for f in self.fractures]
        if len(set(ids)) != len(ids):
            raise GeometryError("fracture identifiers must be unique")
        for f in self.fractures:
            if f.dim != self.ambient_dim:
                raise GeometryError(f"fracture {f.id} has wrong dimension")
            if np.any(np.asarray(f.lo) < lo - tol) or np.any(np.asarray(f.hi) > hi + tol):
                raise GeometryError(f"fracture {f.id} leaves the domain")

    @property
    def tol(self) -> float:
        return _TOL * max(1.0, float(np.max(np.subtract(self.domain_max, self.domain_min))))


@dataclass
class IntersectionLine:
    lo: np.ndarray
    hi: np.ndarray
    parents: Tuple[str, str]

    @property
    def axis(self) -> int:
        return int(np.argmax(self.hi - self.lo))

    @property
    def name(self) -> str:
        return "&".join(self.parents)


@dataclass
class IntersectionPoint:
    coord: np.ndarray
    parents: Tuple  # line indices (3D) or fracture ids (2D)
    fractures: Tuple[str, ...]

    @property
    def name(self) -> str:
        return "&".join(self.fractures)


@dataclass
class IntersectionSet:
    lines: List[IntersectionLine] = field(default_factory=list)
    points: List[IntersectionPoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.lines) + len(self.points)


def _interval_relation(x: float, lo: float, hi: float, tol: float) -> str:
    if x < lo - tol or x > hi + tol:
        return "outside"
    if abs(x - lo) <= tol or abs(x - hi) <= tol:
        return "boundary"
    return "interior"


def intersect_fractures(network: FractureNetwork) -> IntersectionSet:
    """All co-dimension-1 intersections of fractures, plus points where lines meet.

    In 3D, fracture pairs meet in lines and lines meet in points; in 2D,
    fracture pairs meet in points. Coplanar overlaps raise
    :class:`OverlappingFractures`; contacts where a fracture edge lies on
    another fracture raise :class:`TIntersection`.
    """
    tol = network.tol
    fracs = network.fractures
    out = IntersectionSet()

    for a, b in itertools.combinations(fracs, 2):
        na, nb = a.normal_axis, b.normal_axis
        alo, ahi = np.asarray(a.lo), np.asarray(a.hi)
        blo, bhi = np.asarray(b.lo), np.asarray(b.hi)
        if na == nb:
            if abs(a.offset - b.offset) > tol:
                continue
            others = [k for k in range(network.ambient_dim) if k != na]
            overlap = np.minimum(ahi, bhi)[others] - np.maximum(alo, blo)[others]
            if np.all(overlap > tol):
                raise OverlappingFractures(f"fractures {a.id} and {b.id} overlap")
            continue

        # a's plane cuts b along axis na, b's plane cuts a along axis nb
        rel_b = _interval_relation(a.offset, blo[na], bhi[na], tol)
        rel_a = _interval_relation(b.offset, alo[nb], ahi[nb], tol)
        if rel_a == "outside" or rel_b == "outside":
            continue
        if network.ambient_dim == 2:
            if rel_a == "boundary" or rel_b == "boundary":
                raise TIntersection(f"fractures {a.id} and {b.id} touch at a tip")
            coord = np.zeros(2)
            coord[na], coord[nb] = a.offset, b.offset
            out.points.append(IntersectionPoint(coord, (a.id, b.id), (a.id, b.id)))
            continue

        c = 3 - na - nb
        lo_c, hi_c = max(alo[c], blo[c]), min(ahi[c], bhi[c])
        if hi_c < lo_c - tol:
            continue
        if hi_c - lo_c <= tol or rel_a == "boundary" or rel_b == "boundary":
            raise TIntersection(f"fractures {a.id} and {b.id} meet along an edge")
        lo = np.zeros(3)
        lo[na], lo[nb], lo[c] = a.offset, b.offset, lo_c
        hi = lo.copy()
        hi[c] = hi_c
        out.lines.append(IntersectionLine(lo, hi, (a.id, b.id)))

    if network.ambient_dim == 3:
        for (i, l1), (j, l2) in itertools.combinations(enumerate(out.lines), 2):
            c1, c2 = l1.axis, l2.axis
            if c1 == c2:
                continue
            k = 3 - c1 - c2
            if abs(l1.lo[k] - l2.lo[k]) > tol:
                continue
            r1 = _interval_relation(l2.lo[c1], l1.lo[c1], l1.hi[c1], tol)
            r2 = _interval_relation(l1.lo[c2], l2.lo[c2], l2.hi[c2], tol)
            if r1 == "outside" or r2 == "outside":
                continue
            if r1 == "boundary" or r2 == "boundary":
                raise TIntersection(f"lines {l1.name} and {l2.name} meet at an end point")
            coord = l1.lo.copy()
            coord[c1] = l2.lo[c1]
            fr = tuple(sorted(set(l1.parents) | set(l2.parents), key=_frac_order(fracs)))
            for p in out.points:
                if np.linalg.norm(p.coord - coord) <= tol:
                    p.parents = tuple(sorted(set(p.parents) | {i, j}))
                    p.fractures = tuple(sorted(set(p.fractures) | set(fr), key=_frac_order(fracs)))
                    break
            else:
                out.points.append(IntersectionPoint(coord, (i, j), fr))
    return out


def _frac_order(fracs: Sequence[Fracture]):
    order = {f.id: n for n, f in enumerate(fracs)}
    return lambda fid: order[fid]


# --------------------------------------------------------------------------
# Geometry of a single grid


def _canonical_basis(nodes: np.ndarray, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    n_amb = nodes.shape[1]
    origin = nodes.mean(axis=0)
    if dim == n_amb:
        return np.eye(n_amb), np.zeros(n_amb)
    if dim == 0:
        return np.zeros((n_amb, 0)), origin
    centered = nodes - origin
    _, s, vt = np.linalg.svd(centered, full_matrices=True)
    scale = max(s[0], 1e-300)
    if s.size > dim and s[dim] > 1e-8 * scale:
        raise GeometryError(f"nodes of a {dim}D grid are not contained in a {dim}D affine space")
    proj = vt[:dim].T @ vt[:dim]
    # Gram-Schmidt on projected coordinate axes for a reproducible, axis-aligned-when-possible basis
    basis: List[np.ndarray] = []
    for k in range(n_amb):
        v = proj[:, k].copy()
        for b in basis:
            v -= (v @ b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
        if len(basis) == dim:
            break
    return np.array(basis).T, origin


def compute_geometry(g: Grid) -> Grid:
    """Fill face areas/normals/centroids and cell volumes/centroids of ``g``.

    Normals have unit length and are oriented so that ``sign(c, f) * n_f``
    points out of cell ``c`` for every stored incidence. Geometry is computed
    in the grid's own tangent coordinates and mapped back to the ambient
    space. Faces of 3D cells must be planar for the results to be exact.
    """
    n_amb, d = g.ambient_dim, g.dim
    if g.basis is None or g.origin is None:
        g.basis, g.origin = _canonical_basis(g.nodes, d)
    basis, origin = g.basis, g.origin

    if d == 0:
        g.face_areas = np.zeros(0)
        g.face_normals = np.zeros((0, n_amb))
        g.face_centers = np.zeros((0, n_amb))
        g.cell_volumes = np.ones(g.num_cells)
        g.cell_centers = np.tile(g.nodes.mean(axis=0), (g.num_cells, 1))
        return g

    X = (g.nodes - origin) @ basis
    ptr, idx = g.face_node_ptr, g.face_node_idx
    nf = g.num_faces
    counts = np.diff(ptr)

    if d == 1:
        if np.any(counts != 1):
            raise GeometryError("faces of 1D grids are single nodes")
        xf = X[idx]
        area = np.ones(nf)
        nraw = np.ones((nf, 1))
    elif d == 2:
        if np.any(counts != 2):
            raise GeometryError("faces of 2D grids are segments")
        a, b = X[idx[ptr[:-1]]], X[idx[ptr[:-1] + 1]]
        xf = 0.5 * (a + b)
        t = b - a
        area = np.linalg.norm(t, axis=1)
        if np.any(area <= 0):
            raise DegenerateCell("zero-length face")
        nraw = np.column_stack([t[:, 1], -t[:, 0]]) / area[:, None]
    else:
        fe = np.repeat(np.arange(nf), counts)
        nxt = np.arange(idx.size) + 1
        nxt[ptr[1:] - 1] = ptr[:-1]
        cf0 = np.zeros((nf, 3))
        for k in range(3):
            cf0[:, k] = np.bincount(fe, X[idx, k], minlength=nf) / counts
        p = X[idx] - cf0[fe]
        q = X[idx[nxt]] - cf0[fe]
        tri = 0.5 * np.cross(p, q)
        avec = np.zeros((nf, 3))
        for k in range(3):
            avec[:, k] = np.bincount(fe, tri[:, k], minlength=nf)
        area = np.linalg.norm(avec, axis=1)
        if np.any(area <= 0):
            raise DegenerateCell("zero-area face")
        nraw = avec / area[:, None]
        tri_area = np.sum(tri * nraw[fe], axis=1)
        tri_cent = (p + q) / 3.0
        xf = cf0.copy()
        for k in range(3):
            xf[:, k] += np.bincount(fe, tri_area * tri_cent[:, k], minlength=nf) / area

    cells, faces, signs = g.cell_face_pairs()
    nc = g.num_cells
    per_cell = np.bincount(cells, minlength=nc)
    if np.any(per_cell == 0):
        raise DegenerateCell("cell without faces")
    c0 = np.zeros((nc, d))
    for k in range(d):
        c0[:, k] = np.bincount(cells, xf[faces, k], minlength=nc) / per_cell

    _, first = np.unique(faces, return_index=True)
    ff, fc, fs = faces[first], cells[first], signs[first]
    outward = np.sign(np.sum((xf[ff] - c0[fc]) * nraw[ff], axis=1))
    if np.any(outward == 0):
        raise DegenerateCell("cannot orient a face relative to its cell")
    normals = nraw.copy()
    normals[ff] *= (outward * fs)[:, None]

    out_n = normals[faces] * signs[:, None]
    h = np.sum((xf[faces] - c0[cells]) * out_n, axis=1)
    sub = area[faces] * h / d
    vol = np.bincount(cells, sub, minlength=nc)
    scale = np.max(np.abs(X)) if X.size else 1.0
    if np.any(vol <= 1e-14 * max(scale, 1e-300) ** d):
        raise DegenerateCell(f"{g.name}: cell with non-positive measure")
    sub_cent = c0[cells] + d / (d + 1.0) * (xf[faces] - c0[cells])
    xc = np.zeros((nc, d))
    for k in range(d):
        xc[:, k] = np.bincount(cells, sub * sub_cent[:, k], minlength=nc) / vol

    g.face_areas = area
    g.face_normals = normals @ basis.T
    g.face_centers = origin + xf @ basis.T
    g.cell_volumes = vol
    g.cell_centers = origin + xc @ basis.T
    return g


def second_moment_identity(g: Grid) -> np.ndarray:
    """Per cell ``sum_f sign |f| (x_f - x_c) n_f^T / |c|`` in tangent coordinates.

    Equals the identity for any closed cell with planar faces.
    """
    cells, faces, signs = g.cell_face_pairs()
    dx = g.to_local(g.face_centers[faces] - g.cell_centers[cells])
    nl = g.to_local(g.face_normals[faces])
    w = (signs * g.face_areas[faces])[:, None, None]
    terms = w * dx[:, :, None] * nl[:, None, :]
    out = np.zeros((g.num_cells, g.dim, g.dim))
    np.add.at(out, cells, terms)
    return out / g.cell_volumes[:, None, None]


# --------------------------------------------------------------------------
# Cartesian mixed-dimensional meshing


def _cartesian_grid(lattice: List[np.ndarray], lo: np.ndarray, hi: np.ndarray, name: str, parents=()):
    """Cartesian grid of the lattice box [lo, hi] (integer node indices).

    Returns the grid together with doubled-integer keys for its cells and
    faces: a face or cell is identified by twice the lattice index of its
    centroid, which makes coincidence tests between dimensions exact.
    """
    n_amb = len(lattice)
    active = [k for k in range(n_amb) if hi[k] > lo[k]]
    d = len(active)
    node_ranges = [np.arange(lo[k], hi[k] + 1) for k in active]
    nshape = [r.size for r in node_ranges]

    def node_id(*ijk):
        # Fortran ordering, first active axis fastest
        out = np.zeros_like(ijk[0]) if d else 0
        stride = 1
        for a in range(d):
            out = out + (ijk[a] - lo[active[a]]) * stride
            stride *= nshape[a]
        return out

    if d == 0:
        coords = np.array([[lattice[k][lo[k]] for k in range(n_amb)]])
        g = Grid(0, coords, np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64),
                 sps.csc_matrix((0, 1)), name=name, parents=parents)
        key = np.array([2 * lo])
        return g, key, np.zeros((0, n_amb), dtype=np.int64)

    grids_idx = np.meshgrid(*node_ranges, indexing="ij")
    flat = [gi.ravel(order="F") for gi in grids_idx]
    coords = np.zeros((flat[0].size, n_amb))
    for k in range(n_amb):
        coords[:, k] = lattice[k][lo[k]]
    for a, k in enumerate(active):
        coords[:, k] = lattice[k][flat[a]]

    cell_ranges = [np.arange(lo[k], hi[k]) for k in active]
    cshape = [r.size for r in cell_ranges]
    num_cells = int(np.prod(cshape))
    cgrid = np.meshgrid(*cell_ranges, indexing="ij")
    cflat = [ci.ravel(order="F") for ci in cgrid]
    cell_key = np.tile(2 * np.asarray(lo), (num_cells, 1))
    for a, k in enumerate(active):
        cell_key[:, k] = 2 * cflat[a] + 1

    def cell_id(*ijk):
        out = 0
        stride = 1
        for a in range(d):
            out = out + (ijk[a] - lo[active[a]]) * stride
            stride *= cshape[a]
        return out

    face_keys, fptr, fidx, rows, cols, vals = [], [0], [], [], [], []
    nf = 0
    for a, k in enumerate(active):
        ranges = [np.arange(lo[m], hi[m] + 1) if b == a else np.arange(lo[m], hi[m])
                  for b, m in enumerate(active)]
        fg = np.meshgrid(*ranges, indexing="ij")
        ff = [x.ravel(order="F") for x in fg]
        nfa = ff[0].size
        key = np.tile(2 * np.asarray(lo), (nfa, 1))
        for b, m in enumerate(active):
            key[:, m] = 2 * ff[b] + (0 if b == a else 1)
        face_keys.append(key)
        # face nodes
        others = [b for b in range(d) if b != a]
        if d == 1:
            corner_offsets = [()]
        elif d == 2:
            corner_offsets = [(0,), (1,)]
        else:
            corner_offsets = [(0, 0), (1, 0), (1, 1), (0, 1)]
        fnodes = []
        for off in corner_offsets:
            ijk = [None] * d
            ijk[a] = ff[a]
            for b, o in zip(others, off):
                ijk[b] = ff[b] + o
            fnodes.append(node_id(*ijk))
        fnodes = np.column_stack(fnodes)
        fidx.append(fnodes.ravel())
        fptr.extend((np.arange(1, nfa + 1) * fnodes.shape[1] + fptr[-1]).tolist())
        # normal +e_k: cell below has sign +1, cell above has sign -1
        fid = nf + np.arange(nfa)
        below = ff[a] > lo[k]
        above = ff[a] < hi[k]
        ijk_b = list(ff)
        ijk_b[a] = ff[a] - 1
        rows.append(fid[below])
        cols.append(np.asarray(cell_id(*[x[below] for x in ijk_b])))
        vals.append(np.ones(below.sum()))
        rows.append(fid[above])
        cols.append(np.asarray(cell_id(*[x[above] for x in ff])))
        vals.append(-np.ones(above.sum()))
        nf += nfa

    cf = sps.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nf, num_cells),
    )
    g = Grid(d, coords, np.asarray(fptr), np.concatenate(fidx), cf, name=name, parents=parents)
    basis = np.zeros((n_amb, d))
    for a, k in enumerate(active):
        basis[k, a] = 1.0
    g.basis = basis
    g.origin = coords.mean(axis=0)
    return g, cell_key, np.vstack(face_keys)


def _split_faces(g: Grid, face_keys: np.ndarray, child_keys: List[np.ndarray]):
    """Duplicate the faces of ``g`` lying on lower-dimensional children.

    Returns the updated face keys and, per child, arrays (faces, cells, sides)
    mapping each child cell to the coinciding face copies.
    """
    lookup = {tuple(k): i for i, k in enumerate(face_keys)}
    face_cells = g.face_cells()
    cf = g.cell_faces.tocoo()
    rows, cols, vals = list(cf.row), list(cf.col), list(cf.data)
    ptr = list(g.face_node_ptr)
    idx = list(g.face_node_idx)
    keys = [tuple(k) for k in face_keys]
    side = np.zeros(g.num_faces, dtype=np.int8).tolist()
    frac_face = np.zeros(g.num_faces, dtype=bool).tolist()
    # rows/cols position of each (face, cell) entry for re-pointing
    entry = {(r, c): n for n, (r, c) in enumerate(zip(cf.row, cf.col))}

    maps = []
    split_done: Dict[int, int] = {}
    for ck in child_keys:
        faces, cells, sides = [], [], []
        for c, key in enumerate(ck):
            f = lookup.get(tuple(key))
            if f is None:
                raise NonConformingFracture(
                    f"{g.name}: no face coincides with a lower-dimensional cell"
                )
            plus_cell, minus_cell = face_cells[f]
            if f not in split_done:
                frac_face[f] = True
                if plus_cell >= 0 and minus_cell >= 0:
                    new = len(keys)
                    keys.append(keys[f])
                    nodes = g.face_node_idx[g.face_node_ptr[f] : g.face_node_ptr[f + 1]]
                    idx.extend(nodes.tolist())
                    ptr.append(ptr[-1] + nodes.size)
                    # the copy takes the cell above the face (positive side)
                    rows[entry[(f, minus_cell)]] = new
                    side[f] = -1
                    side.append(1)
                    frac_face.append(True)
                    split_done[f] = new
                else:
                    side[f] = -1 if plus_cell >= 0 else 1
                    split_done[f] = -1
            copy = split_done[f]
            faces.append(f)
            cells.append(c)
            sides.append(side[f])
            if copy >= 0:
                faces.append(copy)
                cells.append(c)
                sides.append(1)
        maps.append((np.array(faces, dtype=np.int64), np.array(cells, dtype=np.int64),
                     np.array(sides, dtype=np.int8)))

    nf = len(keys)
    new_cf = sps.csc_matrix((vals, (rows, cols)), shape=(nf, g.num_cells))
    basis, origin = g.basis, g.origin
    g.__init__(g.dim, g.nodes, np.asarray(ptr), np.asarray(idx), new_cf, g.name, g.parents)
    g.basis, g.origin = basis, origin
    g.tags["face_side"] = np.asarray(side, dtype=np.int8)
    g.tags["fracture_faces"] = np.asarray(frac_face, dtype=bool)
    return np.asarray(keys), maps


def _lattice_index(values: np.ndarray, x: float, tol: float) -> Optional[int]:
    i = int(np.argmin(np.abs(values - x)))
    return i if abs(values[i] - x) <= tol else None


def mesh_cartesian(network: FractureNetwork, cells_per_axis: Sequence[int]) -> GridBucket:
    """Conforming Cartesian mixed-dimensional mesh of ``network``.

    Every fracture, intersection line and intersection point must be
    resolved by the lattice; matrix faces on fractures (and fracture faces on
    intersection lines, line faces on points) are split in two.
    """
    n_amb = network.ambient_dim
    cells_per_axis = [int(n) for n in cells_per_axis]
    if len(cells_per_axis) != n_amb or min(cells_per_axis) < 1:
        raise ValueError("cells_per_axis needs one positive entry per axis")
    lattice = [
        np.linspace(network.domain_min[k], network.domain_max[k], cells_per_axis[k] + 1)
        for k in range(n_amb)
    ]
    tol = network.tol * 1e2

    def to_index(lo, hi, what):
        ilo, ihi = np.zeros(n_amb, dtype=np.int64), np.zeros(n_amb, dtype=np.int64)
        for k in range(n_amb):
            a = _lattice_index(lattice[k], lo[k], tol)
            b = _lattice_index(lattice[k], hi[k], tol)
            if a is None or b is None:
                raise NonConformingFracture(f"{what} is not resolved by the Cartesian lattice")
            ilo[k], ihi[k] = a, b
        return ilo, ihi

    inter = intersect_fractures(network)
    bucket = GridBucket(n_amb, (np.array(network.domain_min), np.array(network.domain_max)))

    matrix, mkeys, mfkeys = _cartesian_grid(
        lattice, np.zeros(n_amb, dtype=np.int64), np.array(cells_per_axis), "matrix"
    )
    objects = [(matrix, mkeys, mfkeys)]
    frac_objs = {}
    for f in network.fractures:
        lo, hi = to_index(f.lo, f.hi, f"fracture {f.id}")
        if np.count_nonzero(hi > lo) != n_amb - 1:
            raise NonConformingFracture(f"fracture {f.id} collapses on the lattice")
        frac_objs[f.id] = _cartesian_grid(lattice, lo, hi, f.id)
    line_objs = []
    for line in inter.lines:
        lo, hi = to_index(line.lo, line.hi, f"intersection {line.name}")
        if np.count_nonzero(hi > lo) != 1:
            raise NonConformingFracture(f"intersection {line.name} collapses on the lattice")
        line_objs.append(_cartesian_grid(lattice, lo, hi, line.name, line.parents))
    point_objs = []
    for pt in inter.points:
        lo, hi = to_index(pt.coord, pt.coord, f"intersection point {pt.name}")
        parents = tuple(inter.lines[i].name for i in pt.parents) if n_amb == 3 else pt.parents
        point_objs.append(_cartesian_grid(lattice, lo, hi, pt.name, parents))

    # parent -> children relations
    children: List[Tuple[tuple, list]] = []
    children.append((objects[0], list(frac_objs.values())))
    if n_amb == 3:
        for fid, obj in frac_objs.items():
            kids = [lo for lo, line in zip(line_objs, inter.lines) if fid in line.parents]
            children.append((obj, kids))
        for i, obj in enumerate(line_objs):
            kids = [po for po, pt in zip(point_objs, inter.points) if i in pt.parents]
            children.append((obj, kids))
    else:
        for fid, obj in frac_objs.items():
            kids = [po for po, pt in zip(point_objs, inter.points) if fid in pt.parents]
            children.append((obj, kids))

    edge_specs = []
    for (g, _, fkeys), kids in children:
        if kids:
            newkeys, maps = _split_faces(g, fkeys, [k[1] for k in kids])
            for kid, m in zip(kids, maps):
                edge_specs.append((g, kid[0], m))
        else:
            newkeys = fkeys
        _tag_boundary(g, newkeys, cells_per_axis)

    for g in [matrix] + [o[0] for o in frac_objs.values()] + [o[0] for o in line_objs] + [o[0] for o in point_objs]:
        compute_geometry(g)
        bucket.add_node(g)
    for high, low, (faces, cells, sides) in edge_specs:
        bucket.add_edge(high, low, faces, cells, sides)
    return bucket


def _tag_boundary(g: Grid, face_keys: np.ndarray, cells_per_axis) -> None:
    if g.dim == 0:
        return
    single = g.num_face_cells() == 1
    frac = g.tags["fracture_faces"]
    on_box = np.zeros(g.num_faces, dtype=bool)
    # the normal axis of a face is the active axis with an even key
    active = np.where(g.basis.any(axis=1))[0]
    for k in active:
        even = face_keys[:, k] % 2 == 0
        on_box |= even & ((face_keys[:, k] == 0) | (face_keys[:, k] == 2 * cells_per_axis[k]))
    g.tags["domain_boundary_faces"] = single & ~frac & on_box
    g.tags["tip_faces"] = single & ~frac & ~on_box


def box_side_faces(g: Grid, domain, tol: float = 1e-10) -> Dict[str, np.ndarray]:
    """Boundary faces of ``g`` lying on each side of the domain box.

    Keys are ``xmin``, ``xmax``, ``ymin``, ... .
    """
    lo, hi = np.asarray(domain[0]), np.asarray(domain[1])
    scale = tol * max(1.0, float(np.max(hi - lo)))
    bnd = g.boundary_faces() if g.dim > 0 else np.zeros(0, dtype=bool)
    out = {}
    for k, axis in enumerate("xyz"[: lo.size]):
        for label, val in (("min", lo[k]), ("max", hi[k])):
            if g.dim == 0:
                out[axis + label] = np.zeros(0, dtype=bool)
                continue
            on = np.abs(g.face_centers[:, k] - val) <= scale
            out[axis + label] = bnd & on
    return out
