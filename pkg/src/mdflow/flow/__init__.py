"""Single-phase incompressible flow on a graph of grids."""
from mdflow.flow.assembly import (
    FlowSolution,
    assemble_global,
    boundary_flux,
    cell_residuals,
    pressure_difference,
    side_flux,
    solve_flow,
)
from mdflow.flow.data import (
    BoundaryCondition,
    FlowData,
    assign_kappa,
    kappa_from_data,
    set_box_bc,
)
from mdflow.flow.tpfa import tpfa_assemble, tpfa_coupling
from mdflow.flow.vem import vem_assemble, vem_coupling, vem_local, vem_projection_matrices

__all__ = [
    "BoundaryCondition",
    "FlowData",
    "FlowSolution",
    "assemble_global",
    "assign_kappa",
    "boundary_flux",
    "cell_residuals",
    "kappa_from_data",
    "pressure_difference",
    "set_box_bc",
    "side_flux",
    "solve_flow",
    "tpfa_assemble",
    "tpfa_coupling",
    "vem_assemble",
    "vem_coupling",
    "vem_local",
    "vem_projection_matrices",
]
