"""Physical parameters attached to grid nodes and interface edges."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from mdflow.errors import MissingKappa, NonPositiveInput
from mdflow.geometry import box_side_faces
from mdflow.grid import Grid, GridBucket, InterfaceEdge


@dataclass
class BoundaryCondition:
    """Per-face boundary data of one grid.

    ``values`` holds the pressure on Dirichlet faces and the outward
    volumetric flux on Neumann faces. Entries of faces that are not outer
    boundary faces are ignored.
    """

    dirichlet: np.ndarray
    values: np.ndarray

    @classmethod
    def neumann_zero(cls, g: Grid) -> "BoundaryCondition":
        return cls(np.zeros(g.num_faces, dtype=bool), np.zeros(g.num_faces))

    def copy(self) -> "BoundaryCondition":
        return BoundaryCondition(self.dirichlet.copy(), self.values.copy())


@dataclass
class FlowData:
    """Flow parameters of one grid.

    permeability
        Tangential permeability per cell: shape (nc,) for isotropic media or
        (nc, d, d) in the grid's tangent basis.
    source
        Volumetric source per unit (physical) volume and time.
    aperture
        Per-cell aperture; the cross-sectional measure of a d-dimensional
        cell in N dimensions is ``aperture**(N - d)``.
    normal_permeability
        Used for the interface coefficient of edges where this grid is the
        lower-dimensional side. Defaults to the (isotropic) permeability.
    """

    permeability: np.ndarray
    source: np.ndarray
    aperture: np.ndarray
    bc: BoundaryCondition
    normal_permeability: Optional[np.ndarray] = None

    @classmethod
    def uniform(cls, g: Grid, permeability: float = 1.0, aperture: float = 1.0,
                source: float = 0.0, normal_permeability: Optional[float] = None) -> "FlowData":
        nc = g.num_cells
        kn = None if normal_permeability is None else np.full(nc, float(normal_permeability))
        return cls(np.full(nc, float(permeability)), np.full(nc, float(source)),
                   np.full(nc, float(aperture)), BoundaryCondition.neumann_zero(g), kn)

    def specific_volume(self, g: Grid, ambient_dim: int) -> np.ndarray:
        return np.asarray(self.aperture, dtype=float) ** (ambient_dim - g.dim)

    def local_permeability(self, g: Grid) -> np.ndarray:
        """Permeability as (nc, d, d) tensors in tangent coordinates."""
        K = np.asarray(self.permeability, dtype=float)
        if K.ndim == 1:
            return K[:, None, None] * np.eye(g.dim)[None, :, :]
        return K

    def scalar_normal_permeability(self) -> np.ndarray:
        if self.normal_permeability is not None:
            return np.asarray(self.normal_permeability, dtype=float)
        K = np.asarray(self.permeability, dtype=float)
        if K.ndim == 1:
            return K
        d = K.shape[1]
        return np.trace(K, axis1=1, axis2=2) / max(d, 1)


def kappa_from_data(k_normal, aperture):
    """Effective normal permeability ``2 k_n / a`` (half-aperture resistance)."""
    k = np.asarray(k_normal, dtype=float)
    a = np.asarray(aperture, dtype=float)
    if np.any(k <= 0) or np.any(a <= 0):
        raise NonPositiveInput("normal permeability and aperture must be positive")
    out = 2.0 * k / a
    return float(out) if out.ndim == 0 else out


def assign_kappa(bucket: GridBucket, overwrite: bool = False) -> None:
    """Fill ``edge.kappa`` from the data of each edge's lower-dimensional grid."""
    for e in bucket.edges():
        if e.kappa is not None and not overwrite:
            continue
        low = bucket.data(e.low).get("flow")
        if low is None:
            raise MissingKappa(f"no flow data on {e.low.name!r}")
        e.kappa = np.asarray(kappa_from_data(low.scalar_normal_permeability(), low.aperture),
                             dtype=float).reshape(-1)


def edge_kappa(edge: InterfaceEdge) -> np.ndarray:
    if edge.kappa is None:
        raise MissingKappa(f"{edge!r} has no kappa")
    kappa = np.broadcast_to(np.asarray(edge.kappa, dtype=float), (edge.low.num_cells,))
    return kappa[edge.cells]


def set_box_bc(bucket: GridBucket, sides: Dict[str, tuple]) -> None:
    """Apply per-box-side conditions to every grid of ``bucket``.

    ``sides`` maps ``"xmin"``... to ``("dirichlet", value)`` or
    ``("neumann", flux_density)``; a Neumann density is multiplied by the
    physical face area. Sides not listed get zero flux. Faces that end
    inside the domain keep zero flux.
    """
    N = bucket.ambient_dim
    for g, d in bucket:
        data = d["flow"]
        bc = BoundaryCondition.neumann_zero(g)
        if g.dim > 0:
            side_faces = box_side_faces(g, bucket.domain)
            v = data.specific_volume(g, N)
            fc = g.face_cells()
            owner = np.where(fc[:, 0] >= 0, fc[:, 0], fc[:, 1])
            for side, spec in sides.items():
                kind, value = spec
                mask = side_faces[side]
                val = value(g.face_centers[mask]) if callable(value) else float(value)
                if kind == "dirichlet":
                    bc.dirichlet[mask] = True
                    bc.values[mask] = val
                elif kind == "neumann":
                    bc.values[mask] = val * g.face_areas[mask] * v[owner[mask]]
                else:
                    raise ValueError(f"unknown boundary condition type {kind!r}")
        data.bc = bc


def assign_flow_data(bucket: GridBucket, matrix_permeability: float = 1.0,
                     objects: Optional[Dict[str, dict]] = None,
                     default_fracture: Optional[dict] = None) -> None:
    """Attach :class:`FlowData` to every grid from per-object parameters.

    ``objects`` maps grid names to dicts with optional keys
    ``permeability``, ``aperture``, ``normal_permeability``, ``kappa`` and
    ``source``. Intersections without an entry inherit the largest
    permeability and aperture of their parents. A ``kappa`` entry overrides
    the interface coefficient of edges below that object.
    """
    objects = dict(objects or {})
    default_fracture = dict(default_fracture or {})
    N = bucket.ambient_dim
    resolved: Dict[str, dict] = {}

    def params(g: Grid) -> dict:
        if g.name in resolved:
            return resolved[g.name]
        if g.dim == N:
            p = {"permeability": matrix_permeability, "aperture": 1.0}
            p.update(objects.get(g.name, {}))
        elif g.name in objects:
            p = dict(default_fracture)
            p.update(objects[g.name])
        elif g.parents:
            ps = [params(bucket.grid_by_name(name)) for name in g.parents]
            p = {
                "permeability": max(float(q.get("permeability", 1.0)) for q in ps),
                "aperture": max(float(q.get("aperture", 1.0)) for q in ps),
            }
        else:
            p = dict(default_fracture)
        p.setdefault("permeability", 1.0)
        p.setdefault("aperture", 1.0)
        resolved[g.name] = p
        return p

    for g, d in bucket:
        p = params(g)
        d["flow"] = FlowData.uniform(
            g,
            permeability=float(p["permeability"]),
            aperture=float(p["aperture"]) if g.dim < N else 1.0,
            source=float(p.get("source", 0.0)),
            normal_permeability=p.get("normal_permeability"),
        )
    for e in bucket.edges():
        p = resolved[e.low.name]
        if "kappa" in p:
            e.kappa = np.full(e.low.num_cells, float(p["kappa"]))
        else:
            e.kappa = None
    assign_kappa(bucket)
