"""Acceptance gate: nine end-to-end criteria at their stated tolerances.

Each test records a one-line verdict in ``RESULTS``; the verdicts are
printed at the end of the pytest run (see ``conftest.py``) and when the
module is executed directly.
"""
from __future__ import annotations

import functools
import json
import time

import numpy as np
import pytest
import scipy.sparse as sps

import helpers
from mdflow.flow import (
    cell_residuals,
    boundary_flux,
    pressure_difference,
    set_box_bc,
    side_flux,
    solve_flow,
)
from mdflow.flow.data import assign_flow_data
from mdflow.flow.vem import vem_local, vem_projection_matrices
from mdflow.geometry import (
    Fracture,
    FractureNetwork,
    mesh_cartesian,
    second_moment_identity,
)
from mdflow.io import bucket_from_dict, bucket_to_dict
from mdflow.linalg import extract_block
from mdflow.scenarios import (
    BARRIER,
    three_orthogonal_fractures,
    seven_fracture_network,
    seven_fracture_objects,
)
from mdflow.transport import TransportData, advance, initial_state, step_mass_defect, upwind_assemble

RESULTS = {}
SCHEMES = ("tpfa", "vem")


def report(k, ok, detail):
    RESULTS[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _max_cell_residual(bucket, sol):
    return max(float(np.max(np.abs(r), initial=0.0)) for r in cell_residuals(bucket, sol).values())


# --------------------------------------------------------------------------
# shared computations


@functools.lru_cache(maxsize=None)
def patch_case():
    def p_exact(x):
        return 1.0 + 2.0 * x[:, 0] - x[:, 1] + 0.5 * x[:, 2]

    out = {}
    t0 = time.perf_counter()
    bucket = mesh_cartesian(FractureNetwork(3, (0, 0, 0), (1, 1, 1), []), (10, 10, 10))
    assign_flow_data(bucket, 1.0)
    set_box_bc(bucket, {s: ("dirichlet", p_exact) for s in
                        ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")})
    g = bucket.grids()[0]
    for scheme in SCHEMES:
        sol = solve_flow(bucket, scheme)
        out[scheme] = {"error": float(np.max(np.abs(sol.pressure[g] - p_exact(g.cell_centers)))),
                       "residual": sol.residual}
    out["seconds"] = time.perf_counter() - t0
    return out


@functools.lru_cache(maxsize=None)
def figure1_case():
    bucket = mesh_cartesian(three_orthogonal_fractures(), (8, 8, 8))
    assign_flow_data(bucket, 1.0, default_fracture={"permeability": 100.0, "aperture": 1e-2})
    set_box_bc(bucket, {"xmin": ("dirichlet", 1.0), "xmax": ("dirichlet", 0.0)})
    sols = {s: solve_flow(bucket, s) for s in SCHEMES}
    return bucket, sols


@functools.lru_cache(maxsize=None)
def equidimensional_case(n=32, refine=4, strip_rows=2):
    a = 1e-2
    net = FractureNetwork(2, (0, 0), (1, 1), [Fracture("f", (0.0, 0.5), (1.0, 0.5))])
    bucket = mesh_cartesian(net, (n, n))
    assign_flow_data(bucket, 1.0, {"f": {"permeability": 1.0, "aperture": a}})
    set_box_bc(bucket, {"xmin": ("dirichlet", 1.0), "ymax": ("dirichlet", 0.0)})
    kappa = bucket.edges()[0].kappa

    # the fracture becomes a row of cells of thickness a; the upper half moves up by a
    xs = np.linspace(0, 1, refine * n + 1)
    ylo = np.linspace(0, 0.5, refine * n // 2 + 1)
    ys = np.concatenate([ylo, 0.5 + a * np.arange(1, strip_rows + 1) / strip_rows, 0.5 + a + ylo[1:]])
    P, _ = helpers.tensor_tpfa_2d(xs, ys, np.ones((xs.size - 1, ys.size - 1)),
                                  {"xmin": lambda x, y: 1.0, "ymax": lambda x, y: 0.0})
    nlo = refine * n // 2

    def coarsen(F):
        nx, ny = F.shape
        return F.reshape(nx // refine, refine, ny // refine, refine).mean(axis=(1, 3))

    below, above = coarsen(P[:, :nlo]), coarsen(P[:, nlo + strip_rows:])
    strip = P[:, nlo:nlo + strip_rows].reshape(n, refine, strip_rows).mean(axis=(1, 2))

    g, f = bucket.nodes_of_dim(2)[0], bucket.nodes_of_dim(1)[0]
    i = np.floor(g.cell_centers[:, 0] * n).astype(int)
    j = np.floor(g.cell_centers[:, 1] * n).astype(int)
    ref_m = np.where(j < n // 2, below[i, np.minimum(j, n // 2 - 1)],
                     above[i, np.clip(j - n // 2, 0, n // 2 - 1)])
    ref_f = strip[np.floor(f.cell_centers[:, 0] * n).astype(int)]
    out = {"kappa": float(np.unique(kappa)[0])}
    for scheme in SCHEMES:
        sol = solve_flow(bucket, scheme)
        w_m, w_f = g.cell_volumes, f.cell_volumes * a
        num = np.sum(w_m * (sol.pressure[g] - ref_m) ** 2) + np.sum(w_f * (sol.pressure[f] - ref_f) ** 2)
        den = np.sum(w_m * ref_m ** 2) + np.sum(w_f * ref_f ** 2)
        out[scheme] = {"l2": float(np.sqrt(num / den)), "residual": sol.residual}
    return out


@functools.lru_cache(maxsize=None)
def scenario_case():
    t0 = time.perf_counter()
    bucket = mesh_cartesian(seven_fracture_network(), (32, 16, 16))
    sols = {}
    for conductive in (True, False):
        assign_flow_data(bucket, 1.0, seven_fracture_objects(conductive))
        set_box_bc(bucket, {"xmin": ("dirichlet", 0.0), "xmax": ("dirichlet", 1.0)})
        for scheme in SCHEMES:
            sols[(conductive, scheme)] = solve_flow(bucket, scheme)
    seconds = time.perf_counter() - t0
    # leave the conductive data attached for the transport runs
    assign_flow_data(bucket, 1.0, seven_fracture_objects(True))
    set_box_bc(bucket, {"xmin": ("dirichlet", 0.0), "xmax": ("dirichlet", 1.0)})
    return bucket, sols, seconds


@functools.lru_cache(maxsize=None)
def transport_case(scheme):
    bucket, sols, _ = scenario_case()
    data = TransportData.uniform(bucket, 0.01, 3.0, inflow={"xmax": 1.0})
    system = upwind_assemble(bucket, sols[(True, scheme)], data)
    stats = {"below": 0.0, "above": 0.0, "mass": 0.0, "residual": 0.0, "steps": 0}

    def monitor(old, new, dt):
        c = new.concentration
        stats["steps"] += 1
        stats["below"] = max(stats["below"], float(-c.min()))
        stats["above"] = max(stats["above"], float(c.max() - 1.0))
        stats["mass"] = max(stats["mass"], step_mass_defect(system, old, new, dt))
        A = sps.diags(system.mass / dt) + system.U
        rhs = system.mass / dt * old.concentration + system.b
        stats["residual"] = max(stats["residual"],
                                float(np.linalg.norm(A @ c - rhs) / np.linalg.norm(rhs)))

    final = advance(bucket, initial_state(bucket, data), system, data, monitor)
    N = bucket.ambient_dim
    means = {}
    for g, d in bucket:
        if g.dim == N - 1:
            w = g.cell_volumes * d["flow"].specific_volume(g, N)
            means[g.name] = float(np.sum(w * final.on(g)) / np.sum(w))
    stats["means"] = means
    stats["time"] = final.time
    return stats


# --------------------------------------------------------------------------
# criteria


def test_criterion_1_patch_test():
    r = patch_case()
    errs = {s: r[s]["error"] for s in SCHEMES}
    ok = all(e <= 1e-9 for e in errs.values()) and r["seconds"] <= 5.0
    report(1, ok, f"max pressure error tpfa {errs['tpfa']:.1e}, vem {errs['vem']:.1e}; "
                  f"{r['seconds']:.2f} s")


def test_criterion_2_conservation():
    bucket, sols = figure1_case()
    worst_cell = worst_global = 0.0
    for sol in sols.values():
        worst_cell = max(worst_cell, _max_cell_residual(bucket, sol))
        fl = boundary_flux(bucket, sol)
        worst_global = max(worst_global, abs(fl["inflow"] - fl["outflow"]))
    ok = worst_cell <= 1e-10 and worst_global <= 1e-10
    report(2, ok, f"max cell residual {worst_cell:.1e}, |inflow - outflow| {worst_global:.1e}")


def test_criterion_3_graph_topology():
    bucket, sols = figure1_case()
    nodes = tuple(len(bucket.nodes_of_dim(d)) for d in (3, 2, 1, 0))
    edges = tuple(len(bucket.edges_between(d, d - 1)) for d in (3, 2, 1))
    nonzero = 0
    for sol in sols.values():
        for d in range(4):
            for e in range(4):
                if abs(d - e) >= 2:
                    blk = extract_block(sol.system, d, e)
                    nonzero += int(np.count_nonzero(blk.toarray()))
    ok = nodes == (1, 3, 3, 1) and edges == (3, 6, 3) and nonzero == 0
    report(3, ok, f"nodes {nodes}, edges {edges}, nonzeros in |dd|>=2 blocks: {nonzero}")


def test_criterion_4_equidimensional_oracle():
    r = equidimensional_case()
    l2 = {s: r[s]["l2"] for s in SCHEMES}
    ok = all(v <= 0.01 for v in l2.values()) and abs(r["kappa"] - 200.0) < 1e-12
    report(4, ok, f"relative L2 vs thin-strip solve: tpfa {l2['tpfa']:.2e}, vem {l2['vem']:.2e}")


def test_criterion_5_seven_fracture_scenario():
    bucket, sols, seconds = scenario_case()
    cells = sum(g.num_cells for g in bucket.grids())
    right_to_left = all(
        side_flux(bucket, sols[(True, s)], "xmin") > 0 and side_flux(bucket, sols[(True, s)], "xmax") < 0
        for s in SCHEMES
    )
    diff = pressure_difference(bucket, sols[(True, "vem")], sols[(True, "tpfa")])
    throughput = {k: side_flux(bucket, sol, "xmin") for k, sol in sols.items()}
    more = all(throughput[(True, s)] > throughput[(False, s)] for s in SCHEMES)
    ok = right_to_left and diff <= 0.05 and more and seconds <= 60.0 and cells <= 50000
    report(5, ok, f"right-to-left {right_to_left}; tpfa/vem L2 {diff:.2e}; throughput tpfa "
                  f"{throughput[(True, 'tpfa')]:.4f} vs barrier-only {throughput[(False, 'tpfa')]:.4f}; "
                  f"{cells} cells, {seconds:.1f} s")


def test_criterion_6_transport():
    bucket, _, _ = scenario_case()
    lines, ok = [], True
    for s in SCHEMES:
        st = transport_case(s)
        barrier = max(v for k, v in st["means"].items() if k != "F1")
        good = (st["below"] <= 1e-12 and st["above"] <= 1e-12 and st["mass"] <= 1e-10
                and st["means"]["F1"] > barrier and abs(st["time"] - 3.0) < 1e-12
                and st["steps"] == 300)
        ok &= good
        lines.append(f"{s}: overshoot {max(st['below'], st['above']):.1e}, mass {st['mass']:.1e}, "
                     f"F1 mean {st['means']['F1']:.3f} vs barriers <= {barrier:.3f}")
    report(6, ok, "; ".join(lines))


def _vem_consistency(g, rng):
    worst = 0.0
    for c in range(g.num_cells):
        faces, signs = g.faces_of_cell(c)
        A = rng.normal(size=(g.dim, g.dim))
        K = A @ A.T + g.dim * np.eye(g.dim)
        args = (g.face_areas[faces], g.to_local(g.face_normals[faces]), g.to_local(g.face_centers[faces]),
                signs, g.to_local(g.cell_centers[c]), g.cell_volumes[c], K)
        R, N = vem_projection_matrices(*args[:5], K)
        M = vem_local(*args)
        worst = max(worst, float(np.max(np.abs(M @ N - R))))
    return worst


def test_criterion_7_geometric_identity_and_vem_consistency():
    grids = []
    fig1, _ = figure1_case()
    seven, _, _ = scenario_case()
    grids += fig1.grids() + seven.grids()
    two_d = mesh_cartesian(FractureNetwork(2, (0, 0), (1, 1), [
        Fracture("a", (0.0, 0.5), (1.0, 0.5)), Fracture("b", (0.25, 0.0), (0.25, 1.0))]), (8, 8))
    grids += two_d.grids()
    imported = [bucket_from_dict(json.loads(json.dumps(bucket_to_dict(b)))) for b in (fig1, seven, two_d)]
    imported += [bucket_from_dict(helpers.perturbed_simplex_mesh(d, n, seed=7)) for d, n in ((2, 8), (3, 3))]
    imported += [bucket_from_dict(helpers.random_simplices(d, 100, seed=11)) for d in (2, 3)]
    for b in imported:
        grids += b.grids()
    identity = 0.0
    for g in grids:
        if g.dim > 0:
            identity = max(identity, float(np.max(np.abs(second_moment_identity(g) - np.eye(g.dim)))))
    rng = np.random.default_rng(2024)
    random_cells = imported[-2:]
    consistency = max(_vem_consistency(b.grids()[0], rng) for b in random_cells)
    n_cells = sum(b.grids()[0].num_cells for b in random_cells)
    ok = identity <= 1e-12 and consistency <= 1e-12 and n_cells >= 200
    report(7, ok, f"identity deviation {identity:.1e} over {len(grids)} grids; "
                  f"|M N - R| {consistency:.1e} on {n_cells} perturbed simplices")


def single_cell_transport(n_steps=1):
    """Unit square cell, unit flux from left to right, c_in = 1, dt = 1."""
    bucket = mesh_cartesian(FractureNetwork(2, (0, 0), (1, 1), []), (1, 1))
    assign_flow_data(bucket, 1.0)
    set_box_bc(bucket, {"xmin": ("neumann", -1.0), "xmax": ("neumann", 1.0)})
    sol = solve_flow(bucket, "tpfa")
    data = TransportData.uniform(bucket, 1.0, float(n_steps), inflow={"xmin": 1.0})
    system = upwind_assemble(bucket, sol, data)
    history = []
    final = advance(bucket, initial_state(bucket, data), system, data,
                    lambda old, new, dt: history.append(float(new.concentration[0])))
    return history, final


def test_criterion_8_single_cell_closed_form():
    history, final = single_cell_transport(5)
    expected = [1.0 - 0.5 ** (k + 1) for k in range(5)]
    err = max(abs(h - e) for h, e in zip(history, expected))
    ok = abs(history[0] - 0.5) <= 1e-14 and err <= 1e-14 and final.time == 5.0
    report(8, ok, f"c1 = {history[0]!r}, max deviation from 1 - 2^-n over 5 steps {err:.1e}")


def test_criterion_9_solver_residuals():
    res = []
    p = patch_case()
    res += [p[s]["residual"] for s in SCHEMES]
    _, sols = figure1_case()
    res += [s.residual for s in sols.values()]
    e = equidimensional_case()
    res += [e[s]["residual"] for s in SCHEMES]
    _, sols, _ = scenario_case()
    res += [s.residual for s in sols.values()]
    res += [transport_case(s)["residual"] for s in SCHEMES]
    worst = max(res)
    ok = worst <= 1e-10
    report(9, ok, f"max relative residual {worst:.1e} over {len(res)} flow systems and 600 transport steps")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
