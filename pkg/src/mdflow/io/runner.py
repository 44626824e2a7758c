"""Configuration-driven simulation runs."""
from __future__ import annotations

import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from mdflow.errors import ValidationError
from mdflow.flow import boundary_flux, cell_residuals, set_box_bc, solve_flow
from mdflow.flow.assembly import FlowSolution
from mdflow.flow.data import assign_flow_data
from mdflow.geometry import Fracture, FractureNetwork, mesh_cartesian
from mdflow.grid import GridBucket, assign_dofs
from mdflow.io.config import ScenarioConfig
from mdflow.io.meshio import import_mesh
from mdflow.io.vtk import cell_velocity, write_vtk
from mdflow.transport import (
    TracerState,
    TransportData,
    advance,
    initial_state,
    step_mass_defect,
    upwind_assemble,
)

logger = logging.getLogger(__name__)


def build_bucket(cfg: ScenarioConfig) -> GridBucket:
    """Mesh (or import) the scenario and attach flow data and boundary conditions."""
    if cfg.mesh is not None:
        domain = None
        if cfg.domain_min is not None:
            domain = (np.asarray(cfg.domain_min), np.asarray(cfg.domain_max))
        bucket = import_mesh(cfg.mesh, domain)
        if bucket.ambient_dim != cfg.ambient_dim:
            raise ValidationError(
                f"domain.dim is {cfg.ambient_dim} but the mesh is {bucket.ambient_dim}D"
            )
    else:
        network = FractureNetwork(
            cfg.ambient_dim, cfg.domain_min, cfg.domain_max,
            [Fracture(f.id, f.min, f.max) for f in cfg.fractures],
        )
        bucket = mesh_cartesian(network, cfg.cells)

    names = {g.name for g in bucket.grids()}
    objects = cfg.object_parameters()
    unknown = sorted(set(objects) - names)
    if unknown:
        raise ValidationError(f"objects: no grid named {unknown[0]!r}")
    top = bucket.nodes_of_dim(bucket.dim_max)[0]
    if "source" in cfg.matrix:
        objects.setdefault(top.name, {})["source"] = cfg.matrix["source"]
    assign_flow_data(bucket, cfg.matrix["permeability"], objects, cfg.fracture_defaults)
    set_box_bc(bucket, cfg.boundary)
    return bucket


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _pressure_record(bucket: GridBucket, sol: FlowSolution) -> Dict[str, Any]:
    return {
        "scheme": sol.scheme,
        "grids": [
            {"name": g.name, "dim": g.dim, "pressure": sol.pressure[g].tolist()}
            for g in bucket.grids()
        ],
    }


def reference_difference(bucket: GridBucket, sol: FlowSolution, path) -> float:
    """Relative, volume-weighted L2 difference to a stored ``pressure.json``."""
    try:
        ref = json.loads(Path(path).read_text())
        by_name = {r["name"]: np.asarray(r["pressure"], dtype=float) for r in ref["grids"]}
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"output.reference: cannot use {path} ({exc})") from None
    N = bucket.ambient_dim
    num = den = 0.0
    for g, d in bucket:
        p_ref = by_name.get(g.name)
        if p_ref is None or p_ref.shape != (g.num_cells,):
            raise ValidationError(f"output.reference: grid {g.name!r} does not match the mesh")
        w = g.cell_volumes * d["flow"].specific_volume(g, N)
        num += float(np.sum(w * (sol.pressure[g] - p_ref) ** 2))
        den += float(np.sum(w * p_ref ** 2))
    return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))


class _VtkWriter:
    def __init__(self, bucket: GridBucket, sol: FlowSolution, directory: Path) -> None:
        self.bucket = bucket
        self.directory = directory
        N = bucket.ambient_dim
        self.dims = sorted({g.dim for g in bucket.grids()}, reverse=True)
        self.velocity = {
            g: cell_velocity(g, sol.discharge[g], d["flow"].specific_volume(g, N))
            for g, d in bucket
        }
        self.pressure = sol.pressure
        self.files: List[str] = []

    def write(self, step: int, time_: float, state: Optional[TracerState]) -> None:
        for d in self.dims:
            grids = self.bucket.nodes_of_dim(d)
            fields: Dict[str, list] = {"pressure": [self.pressure[g] for g in grids]}
            if state is not None:
                fields["concentration"] = [state.on(g) for g in grids]
            fields["darcy_velocity"] = [self.velocity[g] for g in grids]
            fields["subdomain"] = [np.full(g.num_cells, float(i)) for i, g in
                                   enumerate(self.bucket.grids()) if g.dim == d]
            name = f"solution_{d}d_{step:05d}.vtk"
            write_vtk(self.directory / name, grids, fields, title=f"mdflow dim={d} t={time_!r}")
            self.files.append(name)


def run(cfg: ScenarioConfig, scheme: Optional[str] = None,
        output_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Solve the scenario and write all artifacts; returns the summary.

    Written to the output directory: ``summary.json``, ``pressure.json``,
    ``timing.json`` and, unless disabled, VTK files
    ``solution_<d>d_<step>.vtk`` for every dimension d. Everything except
    ``timing.json`` is identical across repeated runs.
    """
    clock = {"start": time.perf_counter()}
    scheme = (scheme or cfg.scheme).lower()
    out = Path(output_dir) if output_dir is not None else cfg.output.directory
    out.mkdir(parents=True, exist_ok=True)

    bucket = build_bucket(cfg)
    clock["mesh"] = time.perf_counter()
    sol = solve_flow(bucket, scheme)
    clock["flow"] = time.perf_counter()

    res = cell_residuals(bucket, sol)
    flux = boundary_flux(bucket, sol)
    summary: Dict[str, Any] = {
        "scheme": scheme,
        "grids": [
            {"name": g.name, "dim": g.dim, "cells": g.num_cells, "faces": g.num_faces}
            for g in bucket.grids()
        ],
        "edges": len(bucket.edges()),
        "dofs": {"flow": sol.system.dofmap.num_dofs, "transport": None},
        "flow": {
            "inflow": flux["inflow"],
            "outflow": flux["outflow"],
            "imbalance": abs(flux["inflow"] - flux["outflow"]),
            "solver_residual": sol.residual,
            "max_cell_residual": max(float(np.max(np.abs(r), initial=0.0)) for r in res.values()),
        },
    }
    _write_json(out / "pressure.json", _pressure_record(bucket, sol))
    if cfg.output.reference is not None:
        summary["reference"] = {
            "pressure_l2_difference": reference_difference(bucket, sol, cfg.output.reference)
        }

    writer = _VtkWriter(bucket, sol, out) if cfg.output.vtk else None
    tr = cfg.transport
    if not tr.enabled:
        if writer:
            writer.write(0, 0.0, None)
    else:
        data = TransportData.uniform(
            bucket, tr.dt, tr.t_end, tr.porosity,
            inflow={s: tr.inflow_concentration for s in tr.inflow_sides}, initial=tr.initial,
        )
        system = upwind_assemble(bucket, sol, data)
        state = initial_state(bucket, data)
        summary["dofs"]["transport"] = state.concentration.size
        stats = {"steps": 0, "mass": 0.0, "min": float(state.concentration.min()),
                 "max": float(state.concentration.max())}
        if writer:
            writer.write(0, 0.0, state)

        def monitor(old: TracerState, new: TracerState, dt: float) -> None:
            stats["steps"] += 1
            stats["mass"] = max(stats["mass"], step_mass_defect(system, old, new, dt))
            stats["min"] = min(stats["min"], float(new.concentration.min()))
            stats["max"] = max(stats["max"], float(new.concentration.max()))
            if writer and cfg.output.every and stats["steps"] % cfg.output.every == 0:
                writer.write(stats["steps"], new.time, new)

        final = advance(bucket, state, system, data, monitor)
        if writer and not (cfg.output.every and stats["steps"] % cfg.output.every == 0):
            writer.write(stats["steps"], final.time, final)
        N = bucket.ambient_dim
        means = {}
        for g, d in bucket:
            w = g.cell_volumes * d["flow"].specific_volume(g, N)
            means[g.name] = float(np.sum(w * final.on(g)) / np.sum(w))
        summary["transport"] = {
            "steps": stats["steps"],
            "final_time": final.time,
            "max_step_mass_defect": stats["mass"],
            "min_concentration": stats["min"],
            "max_concentration": stats["max"],
            "mean_concentration": means,
        }
    clock["transport"] = time.perf_counter()
    summary["files"] = ["pressure.json"] + (writer.files if writer else [])
    _write_json(out / "summary.json", summary)
    _write_json(out / "timing.json", {
        "mesh_seconds": clock["mesh"] - clock["start"],
        "flow_seconds": clock["flow"] - clock["mesh"],
        "transport_seconds": clock["transport"] - clock["flow"],
        "total_seconds": time.perf_counter() - clock["start"],
    })
    logger.info("wrote results to %s", out)
    return summary
