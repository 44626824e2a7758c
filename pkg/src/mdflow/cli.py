"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 mesh error, 4 solver or
discretization error, 1 anything else raised by the library.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import List, Optional

import numpy as np

from mdflow import __version__
from mdflow.errors import MdflowError
from mdflow.flow import assemble_global
from mdflow.geometry import second_moment_identity
from mdflow.grid import GridBucket, assign_dofs
from mdflow.io import build_bucket, export_mesh, import_mesh, parse_config, run
from mdflow.linalg import export_matrix_market

logger = logging.getLogger("mdflow")


def _load_bucket(path: Path) -> GridBucket:
    if path.suffix.lower() == ".json":
        return import_mesh(path)
    return build_bucket(parse_config(path))


def _mesh_info(bucket: GridBucket) -> dict:
    grids = []
    worst = 0.0
    for g in bucket.grids():
        dev = 0.0
        if g.dim > 0:
            dev = float(np.max(np.abs(second_moment_identity(g) - np.eye(g.dim)), initial=0.0))
        worst = max(worst, dev)
        grids.append({"name": g.name, "dim": g.dim, "cells": g.num_cells, "faces": g.num_faces,
                      "nodes": g.num_nodes, "parents": list(g.parents)})
    edges = [{"high": e.high.name, "low": e.low.name, "faces": e.size} for e in bucket.edges()]
    return {
        "ambient_dim": bucket.ambient_dim,
        "grids": grids,
        "edges": edges,
        "dofs": {s: assign_dofs(bucket, s).num_dofs for s in ("tpfa", "vem")},
        "geometric_identity_deviation": worst,
    }


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    summary = run(cfg, scheme=args.scheme, output_dir=args.output)
    fl = summary["flow"]
    print(f"{summary['scheme']}: {summary['dofs']['flow']} dofs, inflow {fl['inflow']:.6g}, "
          f"outflow {fl['outflow']:.6g}, residual {fl['solver_residual']:.2e}")
    if "transport" in summary:
        tr = summary["transport"]
        print(f"transport: {tr['steps']} steps to t={tr['final_time']:g}, "
              f"concentration in [{tr['min_concentration']:.3g}, {tr['max_concentration']:.3g}]")
    if "reference" in summary:
        print(f"pressure difference to reference: {summary['reference']['pressure_l2_difference']:.3e}")
    return 0


def cmd_mesh_info(args) -> int:
    info = _mesh_info(_load_bucket(Path(args.source)))
    if args.json:
        print(json.dumps(info, indent=2))
        return 0
    print(f"ambient dimension {info['ambient_dim']}")
    for g in info["grids"]:
        print(f"  {g['dim']}D {g['name']:<12} cells {g['cells']:>7} faces {g['faces']:>7} "
              f"nodes {g['nodes']:>7}")
    for e in info["edges"]:
        print(f"  edge {e['high']} -> {e['low']}: {e['faces']} faces")
    print(f"dofs: tpfa {info['dofs']['tpfa']}, vem {info['dofs']['vem']}")
    print(f"max deviation of the geometric identity: {info['geometric_identity_deviation']:.2e}")
    return 0


def cmd_export_matrix(args) -> int:
    cfg = parse_config(args.config)
    bucket = build_bucket(cfg)
    system = assemble_global(bucket, args.scheme or cfg.scheme)
    export_matrix_market(system.matrix, args.out)
    np.savetxt(Path(str(args.out) + ".rhs"), system.rhs, fmt="%.17g")
    print(f"wrote {system.matrix.shape[0]}x{system.matrix.shape[1]} matrix to {args.out}")
    return 0


def cmd_export_mesh(args) -> int:
    export_mesh(build_bucket(parse_config(args.config)), args.out)
    print(f"wrote mesh to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve a scenario and write results")
    r.add_argument("config", type=Path)
    r.add_argument("--scheme", choices=("tpfa", "vem"), help="override the configured scheme")
    r.add_argument("--output", type=Path, help="override the output directory")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("mesh-info", help="describe the mesh of a scenario or mesh file")
    m.add_argument("source", help="scenario (.toml) or mesh (.json)")
    m.add_argument("--json", action="store_true", help="machine-readable output")
    m.set_defaults(func=cmd_mesh_info)

    e = sub.add_parser("export-matrix", help="write the flow system in Matrix Market format")
    e.add_argument("config", type=Path)
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--scheme", choices=("tpfa", "vem"))
    e.set_defaults(func=cmd_export_matrix)

    x = sub.add_parser("export-mesh", help="write the generated mesh in the mdmesh format")
    x.add_argument("config", type=Path)
    x.add_argument("--out", type=Path, required=True)
    x.set_defaults(func=cmd_export_mesh)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        logging.captureWarnings(True)
        try:
            return args.func(args)
        except MdflowError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        finally:
            logging.captureWarnings(False)


if __name__ == "__main__":
    sys.exit(main())
