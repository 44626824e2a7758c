"""Lowest-order mixed (dual) virtual element method.

Unknowns per grid are the face fluxes followed by the cell pressures. The
local inner product is built from a consistency part, exact for constant
velocity fields, plus a scaled stabilization on the complement of those
fields.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sps

from mdflow.errors import DegenerateCell
from mdflow.flow.data import FlowData, edge_kappa
from mdflow.grid import Grid, InterfaceEdge


def vem_projection_matrices(face_areas, face_normals, face_centers, signs, cell_center, K,
                            specific_volume=1.0) -> Tuple[np.ndarray, np.ndarray]:
    """The matrices R and N of one cell, in outward face orientation.

    Row f of R is ``|f| (x_f - x_c)``, row f of N is ``sign_f n_f^T K v``.
    All vectors are in the cell's own (tangent) coordinates.
    """
    areas = np.asarray(face_areas, dtype=float)
    n_out = np.asarray(face_normals, dtype=float) * np.asarray(signs, dtype=float)[:, None]
    R = areas[:, None] * (np.asarray(face_centers, dtype=float) - np.asarray(cell_center, dtype=float))
    N = n_out @ (np.atleast_2d(K) * specific_volume)
    return R, N


def vem_local(face_areas, face_normals, face_centers, signs, cell_center, cell_volume, K,
              specific_volume=1.0) -> np.ndarray:
    """Local flux inner product of one cell for flux densities.

    The result satisfies ``M @ N == R`` with R and N from
    :func:`vem_projection_matrices`.
    """
    R, N = vem_projection_matrices(face_areas, face_normals, face_centers, signs, cell_center,
                                   K, specific_volume)
    M = _inner_products(R[None], N[None], np.atleast_2d(K)[None],
                        np.array([cell_volume * specific_volume], dtype=float))
    return M[0]


def _inner_products(R: np.ndarray, N: np.ndarray, K: np.ndarray, measure: np.ndarray) -> np.ndarray:
    """Batched consistency plus stabilization, shapes (B, k, d) and (B, d, d)."""
    if np.any(measure <= 0):
        raise DegenerateCell("cell with non-positive measure")
    Kinv = np.linalg.inv(K)
    M0 = np.einsum("bfi,bij,bgj->bfg", R, Kinv, R) / measure[:, None, None]
    NtN = np.einsum("bfi,bfj->bij", N, N)
    P = np.einsum("bfi,bij,bgj->bfg", N, np.linalg.inv(NtN), N)
    k = R.shape[1]
    gamma = np.trace(M0, axis1=1, axis2=2) / k
    return M0 + gamma[:, None, None] * (np.eye(k)[None] - P)


def cell_inner_products(g: Grid, data: FlowData, ambient_dim: int):
    """Per-cell inner products for total face fluxes, grouped by face count.

    Yields ``(cells, faces, signs, M)`` with ``faces`` of shape (B, k) and
    ``M`` of shape (B, k, k) acting on outward total fluxes.
    """
    K = data.local_permeability(g)
    v = data.specific_volume(g, ambient_dim)
    cf = g.cell_faces
    nfaces = np.diff(cf.indptr)
    fn = g.to_local(g.face_normals)
    fc = g.to_local(g.face_centers)
    cc = g.to_local(g.cell_centers)
    for k in np.unique(nfaces):
        cells = np.where(nfaces == k)[0]
        pos = cf.indptr[cells][:, None] + np.arange(k)[None, :]
        faces = cf.indices[pos]
        signs = cf.data[pos]
        areas = g.face_areas[faces]
        R = areas[:, :, None] * (fc[faces] - cc[cells][:, None, :])
        N = (fn[faces] * signs[:, :, None]) @ (K[cells] * v[cells][:, None, None])
        M = _inner_products(R, N, K[cells], g.cell_volumes[cells] * v[cells])
        # flux densities -> total fluxes
        M = M / areas[:, :, None] / areas[:, None, :]
        yield cells, faces, signs, M


@dataclass
class VemDiscretization:
    """Saddle-point block of one grid, unknowns ordered [faces, cells]."""

    matrix: sps.csr_matrix
    rhs: np.ndarray
    fixed_faces: np.ndarray
    fixed_values: np.ndarray


def vem_assemble(g: Grid, data: FlowData, ambient_dim: int) -> VemDiscretization:
    """Assemble ``[[M, B^T], [B, 0]]`` with ``B = -div`` so the block is symmetric.

    Rows of faces with prescribed flux (Neumann) are not eliminated here; they
    are listed in ``fixed_faces`` and eliminated once the global system is
    complete.
    """
    nc, nf = g.num_cells, g.num_faces
    v = data.specific_volume(g, ambient_dim)
    src = np.asarray(data.source, dtype=float) * g.cell_volumes * v
    if g.dim == 0:
        return VemDiscretization(sps.csr_matrix((nc, nc)), -src, np.zeros(0, dtype=np.int64),
                                 np.zeros(0))

    rows, cols, vals = [], [], []
    for cells, faces, signs, M in cell_inner_products(g, data, ambient_dim):
        Mg = M * signs[:, :, None] * signs[:, None, :]
        k = faces.shape[1]
        rows.append(np.repeat(faces, k, axis=1).ravel())
        cols.append(np.tile(faces, (1, k)).ravel())
        vals.append(Mg.ravel())
    mass = sps.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nf, nf)
    )
    div = g.cell_faces.T.tocsr()
    matrix = sps.bmat([[mass, -div.T], [-div, None]], format="csr")

    rhs = np.zeros(nf + nc)
    rhs[nf:] = -src
    n_adj = g.num_face_cells()
    bnd = (n_adj == 1) & ~g.tags["fracture_faces"]
    fcells = g.face_cells()
    sign_owner = np.where(fcells[:, 0] >= 0, 1.0, -1.0)
    dir_face = bnd & data.bc.dirichlet
    rhs[:nf][dir_face] = -sign_owner[dir_face] * data.bc.values[dir_face]
    neu = np.where(bnd & ~data.bc.dirichlet)[0]
    return VemDiscretization(matrix, rhs, neu, sign_owner[neu] * data.bc.values[neu])


@dataclass
class VemCoupling:
    """Entries tying high face fluxes to low cell pressures on one edge.

    ``resistance[i]`` is added to the diagonal of face ``edge.faces[i]``;
    ``signs[i]`` couples that face with ``edge.cells[i]`` symmetrically.
    Faces with zero kappa are listed in ``sealed``.
    """

    resistance: np.ndarray
    signs: np.ndarray
    sealed: np.ndarray


def vem_coupling(edge: InterfaceEdge, high_data: FlowData, low_data: FlowData,
                 ambient_dim: int) -> VemCoupling:
    """Robin-type closure ``u_f = kappa |f| v (p_trace - p_low)`` on every mapped face."""
    gh = edge.high
    kappa = edge_kappa(edge)
    fcells = gh.face_cells()
    hc = np.where(fcells[edge.faces, 0] >= 0, fcells[edge.faces, 0], fcells[edge.faces, 1])
    signs = np.where(fcells[edge.faces, 0] >= 0, 1.0, -1.0)
    vh = high_data.specific_volume(gh, ambient_dim)[hc]
    tn = kappa * gh.face_areas[edge.faces] * vh
    sealed = tn == 0
    with np.errstate(divide="ignore"):
        resistance = np.where(sealed, 0.0, 1.0 / np.where(sealed, 1.0, tn))
    return VemCoupling(resistance, signs, sealed)
