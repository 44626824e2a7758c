"""Mono-dimensional grids and the graph of grids that couples them.

A :class:`GridBucket` holds one node per subdomain grid (matrix, fractures,
intersection lines, intersection points) and one :class:`InterfaceEdge` per
pair of grids one dimension apart that share an interface. Physical data
lives in per-node dictionaries and on the edges, never inside the grids.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps

from mdflow.errors import NonConsecutiveDims


class Grid:
    """A conforming mesh of a single topological dimension.

    Parameters
    ----------
    dim : int
        Topological dimension, 0 to 3.
    nodes : ndarray (num_nodes, ambient_dim)
        Node coordinates in the ambient space.
    face_node_ptr, face_node_idx : ndarray
        CSR-style face to node incidence. Nodes of a face of a 3D cell are
        listed in cyclic order around the face.
    cell_faces : sparse (num_faces, num_cells)
        Oriented incidence; entry (f, c) is +1 if the face normal points out
        of cell c, -1 if it points in.
    name : str
        Identifier of the geometric object the grid discretizes.
    """

    def __init__(
        self,
        dim: int,
        nodes: np.ndarray,
        face_node_ptr: np.ndarray,
        face_node_idx: np.ndarray,
        cell_faces: sps.spmatrix,
        name: str = "",
        parents: Sequence[str] = (),
    ) -> None:
        self.dim = int(dim)
        self.nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        self.face_node_ptr = np.asarray(face_node_ptr, dtype=np.int64)
        self.face_node_idx = np.asarray(face_node_idx, dtype=np.int64)
        cf = sps.csc_matrix(cell_faces, dtype=float)
        cf.sum_duplicates()
        cf.sort_indices()
        self.cell_faces = cf
        self.name = name
        self.parents = tuple(parents)
        self.tags: Dict[str, np.ndarray] = {}

        # filled by compute_geometry
        self.basis: Optional[np.ndarray] = None
        self.origin: Optional[np.ndarray] = None
        self.face_areas: Optional[np.ndarray] = None
        self.face_normals: Optional[np.ndarray] = None
        self.face_centers: Optional[np.ndarray] = None
        self.cell_volumes: Optional[np.ndarray] = None
        self.cell_centers: Optional[np.ndarray] = None

        self._init_tags()

    def __repr__(self) -> str:
        return (
            f"Grid(dim={self.dim}, name={self.name!r}, cells={self.num_cells}, "
            f"faces={self.num_faces}, nodes={self.num_nodes})"
        )

    @property
    def ambient_dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def num_cells(self) -> int:
        return self.cell_faces.shape[1]

    @property
    def num_faces(self) -> int:
        return self.cell_faces.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    def _init_tags(self) -> None:
        nf = self.num_faces
        self.tags.setdefault("fracture_faces", np.zeros(nf, dtype=bool))
        self.tags.setdefault("domain_boundary_faces", np.zeros(nf, dtype=bool))
        self.tags.setdefault("tip_faces", np.zeros(nf, dtype=bool))
        self.tags.setdefault("face_side", np.zeros(nf, dtype=np.int8))

    def nodes_of_face(self, f: int) -> np.ndarray:
        return self.face_node_idx[self.face_node_ptr[f] : self.face_node_ptr[f + 1]]

    def faces_of_cell(self, c: int) -> Tuple[np.ndarray, np.ndarray]:
        """Face indices and orientation signs of cell ``c``."""
        lo, hi = self.cell_faces.indptr[c], self.cell_faces.indptr[c + 1]
        return self.cell_faces.indices[lo:hi], self.cell_faces.data[lo:hi]

    def cell_face_pairs(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat (cell, face, sign) arrays of the oriented incidence."""
        cf = self.cell_faces
        cells = np.repeat(np.arange(self.num_cells), np.diff(cf.indptr))
        return cells, cf.indices.copy(), cf.data.copy()

    def face_cells(self) -> np.ndarray:
        """Array (num_faces, 2) with the cells on the +1 and -1 side of each face.

        Missing neighbours are marked -1.
        """
        out = -np.ones((self.num_faces, 2), dtype=np.int64)
        cells, faces, signs = self.cell_face_pairs()
        pos = signs > 0
        out[faces[pos], 0] = cells[pos]
        out[faces[~pos], 1] = cells[~pos]
        return out

    def num_face_cells(self) -> np.ndarray:
        return np.bincount(self.cell_faces.indices, minlength=self.num_faces)

    def boundary_faces(self) -> np.ndarray:
        """Faces with a single neighbouring cell that are not fracture faces."""
        return (self.num_face_cells() == 1) & ~self.tags["fracture_faces"]

    def to_local(self, vectors: np.ndarray) -> np.ndarray:
        """Express ambient vectors in the grid's tangent basis."""
        return np.asarray(vectors) @ self.basis

    def check_topology(self) -> None:
        """Raise ValueError if the oriented incidence is inconsistent."""
        n_cells = self.num_face_cells()
        if self.dim == 0:
            if self.num_cells != 1 or self.num_faces != 0:
                raise ValueError("0D grids have exactly one cell and no faces")
            return
        if np.any(n_cells < 1) or np.any(n_cells > 2):
            raise ValueError(f"{self.name}: every face needs 1 or 2 cells")
        sums = np.asarray(self.cell_faces.sum(axis=1)).ravel()
        two = n_cells == 2
        if np.any(sums[two] != 0):
            raise ValueError(f"{self.name}: faces shared by two cells need opposite signs")
        if np.any(np.abs(self.cell_faces.data) != 1):
            raise ValueError(f"{self.name}: orientation signs must be +-1")


@dataclass(eq=False)
class InterfaceEdge:
    """Coupling between a grid of dimension d and one of dimension d-1.

    ``faces[i]`` of ``high`` coincides with ``cells[i]`` of ``low``;
    ``sides[i]`` is +1 or -1 and tells on which side of the lower-dimensional
    object the face lies. ``kappa`` is per low cell.
    """

    high: Grid
    low: Grid
    faces: np.ndarray
    cells: np.ndarray
    sides: np.ndarray
    kappa: Optional[np.ndarray] = None
    data: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.faces = np.asarray(self.faces, dtype=np.int64)
        self.cells = np.asarray(self.cells, dtype=np.int64)
        self.sides = np.asarray(self.sides, dtype=np.int8)
        if self.high.dim != self.low.dim + 1:
            raise NonConsecutiveDims(
                f"edge between dims {self.high.dim} and {self.low.dim}"
            )
        for s in (-1, 1):
            cnt = np.bincount(self.cells[self.sides == s], minlength=self.low.num_cells)
            if np.any(cnt > 1):
                raise ValueError("a low cell appears twice on the same side")

    def __repr__(self) -> str:
        return f"InterfaceEdge({self.high.name!r} -> {self.low.name!r}, {self.faces.size} faces)"

    @property
    def size(self) -> int:
        return self.faces.size


class GridBucket:
    """Graph of grids: nodes are grids, edges couple consecutive dimensions."""

    def __init__(self, ambient_dim: int, domain: Optional[Tuple[np.ndarray, np.ndarray]] = None):
        self.ambient_dim = int(ambient_dim)
        self.domain = domain
        self._nodes: List[Grid] = []
        self._data: Dict[int, dict] = {}
        self._edges: List[InterfaceEdge] = []
        self._frozen = False

    def __repr__(self) -> str:
        counts = [len(self.nodes_of_dim(d)) for d in range(self.ambient_dim, -1, -1)]
        return f"GridBucket(ambient_dim={self.ambient_dim}, nodes per dim={counts}, edges={len(self._edges)})"

    def __iter__(self) -> Iterator[Tuple[Grid, dict]]:
        for g in self.grids():
            yield g, self._data[id(g)]

    def __len__(self) -> int:
        return len(self._nodes)

    def add_node(self, grid: Grid, data: Optional[dict] = None) -> Grid:
        self._check_mutable()
        if id(grid) in self._data:
            raise ValueError("grid already in bucket")
        if grid.ambient_dim != self.ambient_dim:
            raise ValueError("grid ambient dimension does not match bucket")
        self._nodes.append(grid)
        self._data[id(grid)] = dict(data or {})
        return grid

    def add_edge(self, high: Grid, low: Grid, faces, cells, sides, kappa=None) -> InterfaceEdge:
        self._check_mutable()
        for g in (high, low):
            if id(g) not in self._data:
                raise ValueError(f"{g!r} is not a node of the bucket")
        edge = InterfaceEdge(high, low, faces, cells, sides, kappa)
        self._edges.append(edge)
        return edge

    def freeze(self) -> None:
        self._frozen = True

    def _check_mutable(self) -> None:
        if self._frozen:
            raise RuntimeError("bucket is frozen")

    @property
    def dim_max(self) -> int:
        return max(g.dim for g in self._nodes)

    def grids(self) -> List[Grid]:
        """All grids ordered by descending dimension, then insertion order."""
        return sorted(self._nodes, key=lambda g: -g.dim)

    def edges(self) -> List[InterfaceEdge]:
        return sorted(self._edges, key=lambda e: -e.high.dim)

    def data(self, grid: Grid) -> dict:
        return self._data[id(grid)]

    def nodes_of_dim(self, d: int) -> List[Grid]:
        return [g for g in self._nodes if g.dim == d]

    def edges_between(self, d: int, d_minus: int) -> List[InterfaceEdge]:
        if d_minus != d - 1:
            raise NonConsecutiveDims(f"dimensions {d} and {d_minus} are not consecutive")
        return [e for e in self._edges if e.high.dim == d]

    def edges_of_node(self, grid: Grid) -> List[InterfaceEdge]:
        return [e for e in self._edges if e.high is grid or e.low is grid]

    def grid_by_name(self, name: str) -> Grid:
        for g in self._nodes:
            if g.name == name:
                return g
        raise KeyError(name)

    def num_cells(self) -> int:
        return sum(g.num_cells for g in self._nodes)


@dataclass
class DofMap:
    """Contiguous block layout of the global unknown vector.

    Blocks follow the order of :meth:`GridBucket.grids`: descending dimension,
    then node insertion order. For the mixed scheme a grid block holds the
    face fluxes followed by the cell pressures.
    """

    scheme: str
    grids: List[Grid]
    offsets: np.ndarray
    face_counts: np.ndarray
    cell_counts: np.ndarray

    @property
    def num_dofs(self) -> int:
        return int(self.offsets[-1])

    def _index(self, grid: Grid) -> int:
        for i, g in enumerate(self.grids):
            if g is grid:
                return i
        raise KeyError(grid)

    def block(self, grid: Grid) -> slice:
        i = self._index(grid)
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def face_slice(self, grid: Grid) -> slice:
        i = self._index(grid)
        start = int(self.offsets[i])
        return slice(start, start + int(self.face_counts[i]))

    def cell_slice(self, grid: Grid) -> slice:
        i = self._index(grid)
        start = int(self.offsets[i] + self.face_counts[i])
        return slice(start, start + int(self.cell_counts[i]))

    def cell_dofs(self, grid: Grid) -> np.ndarray:
        s = self.cell_slice(grid)
        return np.arange(s.start, s.stop)

    def face_dofs(self, grid: Grid) -> np.ndarray:
        s = self.face_slice(grid)
        return np.arange(s.start, s.stop)

    def dim_block(self, d: int) -> slice:
        idx = [i for i, g in enumerate(self.grids) if g.dim == d]
        if not idx:
            return slice(0, 0)
        return slice(int(self.offsets[idx[0]]), int(self.offsets[idx[-1] + 1]))

    def blocks(self) -> Dict[int, slice]:
        return {i: slice(int(self.offsets[i]), int(self.offsets[i + 1])) for i in range(len(self.grids))}


def assign_dofs(bucket: GridBucket, scheme: str) -> DofMap:
    """Lay out the unknowns of ``bucket`` for the ``"tpfa"`` or ``"vem"`` scheme."""
    scheme = scheme.lower()
    if scheme not in ("tpfa", "vem"):
        raise ValueError(f"unknown scheme {scheme!r}")
    grids = bucket.grids()
    faces = np.array(
        [g.num_faces if (scheme == "vem" and g.dim > 0) else 0 for g in grids],
        dtype=np.int64,
    )
    cells = np.array([g.num_cells for g in grids], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(faces + cells)])
    return DofMap(scheme, grids, offsets, faces, cells)
