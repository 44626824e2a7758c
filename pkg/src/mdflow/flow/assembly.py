"""Global mixed-dimensional assembly: iterate over nodes, then over edges."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sps

from mdflow.errors import SingularSystem
from mdflow.flow.data import FlowData, assign_kappa
from mdflow.flow.tpfa import TpfaCoupling, TpfaDiscretization, tpfa_assemble, tpfa_coupling
from mdflow.flow.vem import VemCoupling, VemDiscretization, vem_assemble, vem_coupling
from mdflow.grid import DofMap, Grid, GridBucket, InterfaceEdge, assign_dofs
from mdflow.linalg import BlockSystem, from_triplets, solve_direct

logger = logging.getLogger(__name__)


@dataclass
class FlowSolution:
    scheme: str
    pressure: Dict[Grid, np.ndarray]
    discharge: Dict[Grid, np.ndarray]
    interface_flux: Dict[InterfaceEdge, np.ndarray]
    system: BlockSystem
    x: np.ndarray
    residual: float
    face_flux: Dict[Grid, np.ndarray] = field(default_factory=dict)


class _Triplets:
    def __init__(self) -> None:
        self.rows: List[np.ndarray] = []
        self.cols: List[np.ndarray] = []
        self.vals: List[np.ndarray] = []

    def add(self, A: sps.spmatrix, row0: int, col0: int) -> None:
        A = sps.coo_matrix(A)
        self.rows.append(A.row + row0)
        self.cols.append(A.col + col0)
        self.vals.append(A.data)

    def add_arrays(self, r, c, v) -> None:
        self.rows.append(np.asarray(r, dtype=np.int64))
        self.cols.append(np.asarray(c, dtype=np.int64))
        self.vals.append(np.asarray(v, dtype=float))

    def build(self, n: int) -> sps.csr_matrix:
        if not self.rows:
            return from_triplets(n, n, [])
        return from_triplets(
            n, n, (np.concatenate(self.rows), np.concatenate(self.cols), np.concatenate(self.vals))
        )


def _flow_data(bucket: GridBucket, g: Grid) -> FlowData:
    return bucket.data(g)["flow"]


def assemble_global(bucket: GridBucket, scheme: str) -> BlockSystem:
    """Global block system of the flow problem on ``bucket``.

    Node discretizations fill the diagonal blocks, edge couplings the
    blocks between consecutive dimensions. Per-node and per-edge
    discretizations are cached in the bucket data under ``"tpfa"``/``"vem"``.
    """
    scheme = scheme.lower()
    N = bucket.ambient_dim
    if any(e.kappa is None for e in bucket.edges()):
        assign_kappa(bucket)
    dofs = assign_dofs(bucket, scheme)
    n = dofs.num_dofs
    trip = _Triplets()
    rhs = np.zeros(n)
    fixed_dofs, fixed_vals = [], []

    for g, d in bucket:
        data = d["flow"]
        s = dofs.block(g)
        if scheme == "tpfa":
            disc = tpfa_assemble(g, data, N)
        else:
            disc = vem_assemble(g, data, N)
            fixed_dofs.append(s.start + disc.fixed_faces)
            fixed_vals.append(disc.fixed_values)
        d.setdefault("discretization", {})[scheme] = disc
        trip.add(disc.matrix, s.start, s.start)
        rhs[s] += disc.rhs

    for e in bucket.edges():
        hd, ld = _flow_data(bucket, e.high), _flow_data(bucket, e.low)
        if scheme == "tpfa":
            cpl = tpfa_coupling(e, hd, ld, N)
            h0, l0 = dofs.block(e.high).start, dofs.block(e.low).start
            trip.add(cpl.H, h0, h0)
            trip.add(cpl.C_hl, h0, l0)
            trip.add(cpl.C_lh, l0, h0)
            trip.add(cpl.L, l0, l0)
        else:
            cpl = vem_coupling(e, hd, ld, N)
            fdof = dofs.face_slice(e.high).start + e.faces
            cdof = dofs.cell_slice(e.low).start + e.cells
            live = ~cpl.sealed
            trip.add_arrays(fdof[live], fdof[live], cpl.resistance[live])
            trip.add_arrays(fdof[live], cdof[live], cpl.signs[live])
            trip.add_arrays(cdof[live], fdof[live], cpl.signs[live])
            fixed_dofs.append(fdof[cpl.sealed])
            fixed_vals.append(np.zeros(int(cpl.sealed.sum())))
        e.data.setdefault("discretization", {})[scheme] = cpl

    A = trip.build(n)
    if fixed_dofs:
        fd = np.concatenate(fixed_dofs).astype(np.int64)
        fv = np.concatenate(fixed_vals)
        if fd.size:
            A, rhs = _eliminate(A, rhs, fd, fv)
    return BlockSystem(A, rhs, dofs)


def _eliminate(A: sps.csr_matrix, rhs: np.ndarray, dofs: np.ndarray, values: np.ndarray):
    """Impose ``x[dofs] = values`` keeping the matrix symmetric."""
    xfix = np.zeros(A.shape[0])
    xfix[dofs] = values
    rhs = rhs - A @ xfix
    keep = np.ones(A.shape[0])
    keep[dofs] = 0.0
    K = sps.diags(keep)
    A = (K @ A @ K).tocsr()
    A = A + sps.diags(1.0 - keep)
    rhs[dofs] = values
    A = sps.csr_matrix(A)
    A.eliminate_zeros()
    return A, rhs


def _has_dirichlet(bucket: GridBucket) -> bool:
    for g, d in bucket:
        if g.dim == 0:
            continue
        bnd = g.boundary_faces()
        if np.any(d["flow"].bc.dirichlet & bnd):
            return True
    return False


def solve_flow(bucket: GridBucket, scheme: str = "tpfa") -> FlowSolution:
    """Assemble, solve, and reconstruct pressures and discharges."""
    scheme = scheme.lower()
    system = assemble_global(bucket, scheme)
    dofs = system.dofmap
    if not _has_dirichlet(bucket):
        top = bucket.nodes_of_dim(bucket.dim_max)[0]
        pin = dofs.cell_slice(top).start
        logger.info("no Dirichlet data; pinning pressure dof %d to zero", pin)
        A, b = _eliminate(system.matrix, system.rhs.copy(), np.array([pin]), np.zeros(1))
        system = BlockSystem(A, b, dofs)
    x = solve_direct(system)
    residual = system.residual(x)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    logger.info("%s: %d dofs, relative residual %.2e", scheme, dofs.num_dofs, residual)

    pressure = {g: x[dofs.cell_slice(g)].copy() for g in bucket.grids()}
    discharge: Dict[Grid, np.ndarray] = {}
    iflux: Dict[InterfaceEdge, np.ndarray] = {}
    if scheme == "tpfa":
        for g, d in bucket:
            disc: TpfaDiscretization = d["discretization"]["tpfa"]
            discharge[g] = disc.flux @ pressure[g] + disc.bound_flux
        for e in bucket.edges():
            cpl: TpfaCoupling = e.data["discretization"]["tpfa"]
            lam = cpl.trans * (pressure[e.high][cpl.high_cells] - pressure[e.low][e.cells])
            iflux[e] = lam
            discharge[e.high][e.faces] = cpl.high_signs * lam
    else:
        for g in bucket.grids():
            discharge[g] = x[dofs.face_slice(g)].copy()
        for e in bucket.edges():
            cpl: VemCoupling = e.data["discretization"]["vem"]
            iflux[e] = cpl.signs * discharge[e.high][e.faces]
    return FlowSolution(scheme, pressure, discharge, iflux, system, x, residual,
                        face_flux=discharge if scheme == "vem" else {})


def cell_residuals(bucket: GridBucket, sol: FlowSolution) -> Dict[Grid, np.ndarray]:
    """Mass-balance defect of every cell.

    ``sum_f sign * discharge_f - sum(interface inflow) - f |E| v`` per cell.
    """
    N = bucket.ambient_dim
    out = {}
    for g, d in bucket:
        data = d["flow"]
        v = data.specific_volume(g, N)
        res = g.cell_faces.T @ sol.discharge[g] if g.num_faces else np.zeros(g.num_cells)
        res = res - np.asarray(data.source) * g.cell_volumes * v
        out[g] = res
    for e in bucket.edges():
        np.subtract.at(out[e.low], e.cells, sol.interface_flux[e])
    return out


def boundary_flux(bucket: GridBucket, sol: FlowSolution) -> Dict[str, float]:
    """Net inflow and outflow over all outer boundary faces, all grids."""
    inflow = outflow = 0.0
    for g in bucket.grids():
        if g.dim == 0:
            continue
        bnd = g.boundary_faces()
        fc = g.face_cells()
        sign = np.where(fc[:, 0] >= 0, 1.0, -1.0)
        out = sign[bnd] * sol.discharge[g][bnd]
        inflow += float(-out[out < 0].sum())
        outflow += float(out[out > 0].sum())
    return {"inflow": inflow, "outflow": outflow}


def side_flux(bucket: GridBucket, sol: FlowSolution, side: str) -> float:
    """Net outward flux through one side of the domain box, all grids."""
    from mdflow.geometry import box_side_faces

    total = 0.0
    for g in bucket.grids():
        if g.dim == 0:
            continue
        mask = box_side_faces(g, bucket.domain)[side]
        fc = g.face_cells()
        sign = np.where(fc[:, 0] >= 0, 1.0, -1.0)
        total += float(np.sum(sign[mask] * sol.discharge[g][mask]))
    return total


def pressure_difference(bucket: GridBucket, a: FlowSolution, b: FlowSolution) -> float:
    """Relative L2 difference of cell pressures, weighted by physical volume."""
    N = bucket.ambient_dim
    num = den = 0.0
    for g, d in bucket:
        w = g.cell_volumes * d["flow"].specific_volume(g, N)
        num += float(np.sum(w * (a.pressure[g] - b.pressure[g]) ** 2))
        den += float(np.sum(w * b.pressure[g] ** 2))
    return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))
