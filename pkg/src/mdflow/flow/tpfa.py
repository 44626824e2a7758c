"""Two-point flux approximation on a single grid and across interfaces."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from mdflow.errors import NonPositiveTransmissibility
from mdflow.flow.data import FlowData, edge_kappa
from mdflow.grid import Grid, InterfaceEdge


@dataclass
class TpfaDiscretization:
    """Cell-centred system of one grid.

    The discharge over every non-fracture face is
    ``flux @ p + bound_flux``; ``matrix @ p = rhs`` is the mass balance.
    """

    matrix: sps.csr_matrix
    rhs: np.ndarray
    flux: sps.csr_matrix
    bound_flux: np.ndarray


def half_transmissibilities(g: Grid, data: FlowData, ambient_dim: int):
    """Half-transmissibility of every (cell, face) pair of ``g``.

    Returns cells, faces, signs and t, aligned with
    :meth:`Grid.cell_face_pairs`.
    """
    cells, faces, signs = g.cell_face_pairs()
    K = data.local_permeability(g)
    v = data.specific_volume(g, ambient_dim)
    dx = g.to_local(g.face_centers[faces] - g.cell_centers[cells])
    n_out = g.to_local(g.face_normals[faces]) * signs[:, None]
    Kn = np.einsum("mij,mj->mi", K[cells], n_out)
    t = v[cells] * g.face_areas[faces] * np.sum(Kn * dx, axis=1) / np.sum(dx * dx, axis=1)
    if np.any(t <= 0):
        warnings.warn(
            f"{g.name}: {int(np.sum(t <= 0))} non-positive half-transmissibilities; "
            "the grid is not K-orthogonal",
            NonPositiveTransmissibility,
            stacklevel=2,
        )
    return cells, faces, signs, t


def tpfa_assemble(g: Grid, data: FlowData, ambient_dim: int) -> TpfaDiscretization:
    """Discretize the mass balance of ``g`` with two-point fluxes.

    Fracture faces get no flux here; their flux comes from the interface
    coupling.
    """
    nc, nf = g.num_cells, g.num_faces
    v = data.specific_volume(g, ambient_dim)
    src = np.asarray(data.source, dtype=float) * g.cell_volumes * v
    if g.dim == 0:
        empty = sps.csr_matrix((nf, nc))
        return TpfaDiscretization(sps.csr_matrix((nc, nc)), src, empty, np.zeros(nf))

    cells, faces, signs, t = half_transmissibilities(g, data, ambient_dim)
    n_adj = g.num_face_cells()
    frac = g.tags["fracture_faces"]
    bnd = (n_adj == 1) & ~frac
    dir_face = bnd & data.bc.dirichlet
    neu_face = bnd & ~data.bc.dirichlet

    # harmonic face transmissibility over internal faces
    inv = np.bincount(faces, 1.0 / t, minlength=nf)
    T = np.zeros(nf)
    internal = n_adj == 2
    T[internal] = 1.0 / inv[internal]
    T[dir_face] = 1.0 / inv[dir_face]

    use = internal[faces] | dir_face[faces]
    # discharge_f = sum_c sign(c, f) * T_f * p_c  (+ boundary part)
    flux = sps.csr_matrix(
        (signs[use] * T[faces[use]], (faces[use], cells[use])), shape=(nf, nc)
    )
    bound_flux = np.zeros(nf)
    fc = g.face_cells()
    owner = np.where(fc[:, 0] >= 0, fc[:, 0], fc[:, 1])
    sign_owner = np.where(fc[:, 0] >= 0, 1.0, -1.0)
    bound_flux[dir_face] = -sign_owner[dir_face] * T[dir_face] * data.bc.values[dir_face]
    bound_flux[neu_face] = sign_owner[neu_face] * data.bc.values[neu_face]

    div = g.cell_faces.T.tocsr()
    matrix = (div @ flux).tocsr()
    rhs = src - div @ bound_flux
    return TpfaDiscretization(matrix, rhs, flux, bound_flux)


@dataclass
class TpfaCoupling:
    """Interface blocks of one edge; ``lambda = trans * (p_high[high_cells] - p_low[edge.cells])``."""

    H: sps.csr_matrix
    C_hl: sps.csr_matrix
    C_lh: sps.csr_matrix
    L: sps.csr_matrix
    trans: np.ndarray
    high_cells: np.ndarray
    high_signs: np.ndarray


def tpfa_coupling(edge: InterfaceEdge, high_data: FlowData, low_data: FlowData,
                  ambient_dim: int) -> TpfaCoupling:
    """Two-point discretization of the interface Darcy law on ``edge``.

    The interface transmissibility is the harmonic combination of the
    high-side half-transmissibility and ``kappa * |f| * specific_volume``.
    """
    gh, gl = edge.high, edge.low
    kappa = edge_kappa(edge)
    cells, faces, signs, t = half_transmissibilities(gh, high_data, ambient_dim)
    # each mapped face has exactly one high cell
    pos = {f: i for i, f in enumerate(faces)}
    k = np.array([pos[f] for f in edge.faces], dtype=np.int64)
    hc, th, sh = cells[k], t[k], signs[k]
    vh = high_data.specific_volume(gh, ambient_dim)[hc]
    tn = kappa * gh.face_areas[edge.faces] * vh
    with np.errstate(divide="ignore"):
        # kappa = 0 seals the interface, kappa = inf leaves only the cell resistance
        trans = 1.0 / (1.0 / th + 1.0 / tn)
    nh, nl, m = gh.num_cells, gl.num_cells, edge.size
    Ph = sps.csr_matrix((np.ones(m), (np.arange(m), hc)), shape=(m, nh))
    Pl = sps.csr_matrix((np.ones(m), (np.arange(m), edge.cells)), shape=(m, nl))
    Tm = sps.diags(trans)
    H = (Ph.T @ Tm @ Ph).tocsr()
    L = (Pl.T @ Tm @ Pl).tocsr()
    C_hl = (-(Ph.T @ Tm @ Pl)).tocsr()
    C_lh = C_hl.T.tocsr()
    return TpfaCoupling(H, C_hl, C_lh, L, trans, hc, sh)
