"""Passive tracer advection: first-order upwind in space, implicit Euler in time.

Concentrations of all grids share one vector laid out like the cell
unknowns of the two-point scheme. Interface fluxes are upwinded between the
higher-dimensional cell next to a mapped face and the lower-dimensional
cell, exactly as internal faces are.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional

import numpy as np
import scipy.sparse as sps

from mdflow.errors import MissingFlux, SingularSystem
from mdflow.flow.assembly import FlowSolution
from mdflow.geometry import box_side_faces
from mdflow.grid import DofMap, Grid, GridBucket, assign_dofs
from mdflow.linalg import factorize

# The storage term is only accurate to about eps * (stored mass) / dt; to
# resolve relative defects of 1e-10 the reference must stay well above that,
# so flux rates below this fraction of the stored mass per step count as none.
STAGNATION = 1e-4


@dataclass
class TransportData:
    dt: float
    t_end: float
    porosity: Dict[Grid, np.ndarray]
    inflow_concentration: Dict[Grid, np.ndarray]
    initial: Dict[Grid, np.ndarray]

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.t_end < self.dt:
            raise ValueError("final time must be at least one time step")
        for phi in self.porosity.values():
            if np.any(phi <= 0) or np.any(phi > 1):
                raise ValueError("porosity must lie in (0, 1]")

    @classmethod
    def uniform(cls, bucket: GridBucket, dt: float, t_end: float, porosity: float = 1.0,
                inflow: Optional[Mapping[str, float]] = None, initial: float = 0.0) -> "TransportData":
        """Same porosity and initial value everywhere; ``inflow`` maps box sides to concentrations."""
        phi, cin, c0 = {}, {}, {}
        for g in bucket.grids():
            phi[g] = np.full(g.num_cells, float(porosity))
            c0[g] = np.full(g.num_cells, float(initial))
            cin[g] = np.zeros(g.num_faces)
            if inflow and g.dim > 0:
                sides = box_side_faces(g, bucket.domain)
                for side, value in inflow.items():
                    cin[g][sides[side]] = float(value)
        return cls(float(dt), float(t_end), phi, cin, c0)


@dataclass
class TracerState:
    concentration: np.ndarray
    time: float
    dofmap: DofMap

    def on(self, g: Grid) -> np.ndarray:
        return self.concentration[self.dofmap.cell_slice(g)]

    def copy(self) -> "TracerState":
        return TracerState(self.concentration.copy(), self.time, self.dofmap)


@dataclass
class UpwindSystem:
    """``U c = b`` at steady state; ``mass`` holds porosity times physical volume.

    ``outflow`` is the boundary outflow rate per cell, so the mass leaving
    the domain per unit time is ``outflow @ c``; ``b.sum()`` is the mass
    entering. ``sink`` is the rate at which cells are drained at their own
    concentration: the extraction of negative flow sources plus the
    imbalance of the discharge, which is round-off for a conservative
    flow field and may have either sign.
    """

    U: sps.csr_matrix
    b: np.ndarray
    mass: np.ndarray
    outflow: np.ndarray
    dofmap: DofMap
    internal: sps.csr_matrix = field(repr=False, default=None)
    sink: np.ndarray = field(repr=False, default=None)


def initial_state(bucket: GridBucket, data: TransportData) -> TracerState:
    dofs = assign_dofs(bucket, "tpfa")
    c = np.zeros(dofs.num_dofs)
    for g in bucket.grids():
        c[dofs.cell_slice(g)] = data.initial[g]
    return TracerState(c, 0.0, dofs)


def upwind_assemble(bucket: GridBucket, solution: FlowSolution, data: TransportData) -> UpwindSystem:
    """Upwind advection operator of the discharge in ``solution``."""
    N = bucket.ambient_dim
    dofs = assign_dofs(bucket, "tpfa")
    n = dofs.num_dofs
    rows, cols, vals = [], [], []
    b = np.zeros(n)
    outflow = np.zeros(n)
    mass = np.zeros(n)

    def upwind(up, down, q):
        # q >= 0 is carried from `up` to `down`
        rows.append(up)
        cols.append(up)
        vals.append(q)
        rows.append(down)
        cols.append(up)
        vals.append(-q)

    for g, d in bucket:
        if g not in solution.discharge:
            raise MissingFlux(f"no discharge on {g.name!r}")
        off = dofs.cell_slice(g).start
        v = d["flow"].specific_volume(g, N)
        mass[off : off + g.num_cells] = data.porosity[g] * g.cell_volumes * v
        if g.dim == 0:
            continue
        q = solution.discharge[g]
        fc = g.face_cells()
        internal = (fc[:, 0] >= 0) & (fc[:, 1] >= 0)
        qi = q[internal]
        plus, minus = fc[internal, 0] + off, fc[internal, 1] + off
        fwd = qi >= 0
        upwind(plus[fwd], minus[fwd], qi[fwd])
        upwind(minus[~fwd], plus[~fwd], -qi[~fwd])

        bnd = g.boundary_faces()
        owner = np.where(fc[:, 0] >= 0, fc[:, 0], fc[:, 1])[bnd] + off
        q_out = np.where(fc[bnd, 0] >= 0, 1.0, -1.0) * q[bnd]
        out = q_out > 0
        np.add.at(outflow, owner[out], q_out[out])
        np.add.at(b, owner[~out], -q_out[~out] * data.inflow_concentration[g][bnd][~out])

    for e in bucket.edges():
        if e not in solution.interface_flux:
            raise MissingFlux(f"no interface flux on {e!r}")
        lam = solution.interface_flux[e]
        fc = e.high.face_cells()
        hc = np.where(fc[e.faces, 0] >= 0, fc[e.faces, 0], fc[e.faces, 1])
        hi = hc + dofs.cell_slice(e.high).start
        lo = e.cells + dofs.cell_slice(e.low).start
        fwd = lam >= 0
        upwind(hi[fwd], lo[fwd], lam[fwd])
        upwind(lo[~fwd], hi[~fwd], -lam[~fwd])

    if rows:
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    internal_op = sps.csr_matrix((v, (r, c)), shape=(n, n))

    # Every cell drains at its own concentration the fluid its flow sources
    # remove plus whatever the discharge fails to balance (round-off). Row
    # sums of U then equal boundary inflow plus injected volume, so constant
    # states are preserved and the update stays bounded by the data. Fluid
    # injected by sources carries no tracer.
    out_internal = np.asarray(internal_op.diagonal())
    in_internal = out_internal - np.asarray(internal_op.sum(axis=1)).ravel()
    in_bnd = np.zeros(n)
    src = np.zeros(n)
    for g, d in bucket:
        off = dofs.cell_slice(g).start
        flow = d["flow"]
        src[off : off + g.num_cells] = (np.asarray(flow.source, dtype=float) * g.cell_volumes
                                        * flow.specific_volume(g, N))
        if g.dim == 0:
            continue
        fc = g.face_cells()
        bnd = g.boundary_faces()
        owner = np.where(fc[:, 0] >= 0, fc[:, 0], fc[:, 1])[bnd] + off
        q_in = -np.where(fc[bnd, 0] >= 0, 1.0, -1.0) * solution.discharge[g][bnd]
        np.add.at(in_bnd, owner[q_in > 0], q_in[q_in > 0])
    imbalance = in_internal + in_bnd + src - out_internal - outflow
    sink = np.maximum(0.0, -src) + imbalance
    U = (internal_op + sps.diags(outflow + sink)).tocsr()
    return UpwindSystem(U, b, mass, outflow, dofs, internal_op, sink)


class _Stepper:
    """Implicit Euler with one factorization per distinct step length."""

    def __init__(self, system: UpwindSystem) -> None:
        self.system = system
        self._cache: Dict[float, object] = {}

    def step(self, c: np.ndarray, dt: float) -> np.ndarray:
        lu = self._cache.get(dt)
        if lu is None:
            A = sps.diags(self.system.mass / dt) + self.system.U
            try:
                lu = factorize(A)
            except SingularSystem as exc:
                raise SingularSystem(f"transport matrix is singular: {exc}") from None
            self._cache[dt] = lu
        return lu.solve(self.system.mass / dt * c + self.system.b)


def advance(bucket: GridBucket, state: TracerState, system: UpwindSystem, data: TransportData,
            callback: Optional[Callable[[TracerState, TracerState, float], None]] = None) -> TracerState:
    """Integrate from ``state.time`` to ``data.t_end`` with steps of ``data.dt``.

    The last step is shortened to end exactly at ``t_end``. ``callback`` is
    called after every step with (previous state, new state, step length).
    """
    stepper = _Stepper(system)
    current = state.copy()
    t_end = data.t_end
    eps = 1e-10 * max(data.dt, 1.0)
    n_full = int(np.floor((t_end - current.time) / data.dt + 1e-9))
    times = current.time + data.dt * np.arange(1, n_full + 1)
    if times.size == 0 or t_end - times[-1] > eps:
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    for t_new in times:
        dt = data.dt if abs((t_new - current.time) - data.dt) <= eps else t_new - current.time
        c_new = stepper.step(current.concentration, dt)
        new = TracerState(c_new, float(t_new), current.dofmap)
        if callback is not None:
            callback(current, new, dt)
        current = new
    return current


def step_mass_defect(system: UpwindSystem, old: TracerState, new: TracerState, dt: float) -> float:
    """Relative mismatch between storage change and in/outflow over one step.

    The reference is the largest of the mass rates involved. Drained sink
    mass counts as outflow. Rates below ``STAGNATION`` times the stored mass
    per step are round-off, and the defect is then measured against that
    floor.
    """
    storage = float(np.sum(system.mass * (new.concentration - old.concentration)) / dt)
    inflow = float(system.b.sum())
    outflow = float((system.outflow + system.sink) @ new.concentration)
    # without throughput (stagnant steps) the defect is relative to the stored mass
    stored = float(np.sum(system.mass * np.abs(new.concentration))) / dt
    scale = max(abs(storage), inflow, abs(outflow), STAGNATION * stored, 1e-300)
    return abs(storage - (inflow - outflow)) / scale
