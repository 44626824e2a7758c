import numpy as np
import pytest

from mdflow.errors import MissingKappa, NonPositiveInput
from mdflow.flow import (
    FlowData,
    assemble_global,
    cell_residuals,
    kappa_from_data,
    set_box_bc,
    side_flux,
    solve_flow,
    tpfa_assemble,
    tpfa_coupling,
    vem_assemble,
    vem_local,
    vem_projection_matrices,
)
from mdflow.flow.data import assign_flow_data
from mdflow.flow.tpfa import half_transmissibilities
from mdflow.geometry import Fracture, FractureNetwork, mesh_cartesian
from mdflow.linalg import extract_block
from mdflow.scenarios import three_orthogonal_fractures


def box(dim, hi, cells, fracs=(), perm=1.0, objects=None, bc=None):
    bucket = mesh_cartesian(FractureNetwork(dim, (0,) * dim, hi, list(fracs)), cells)
    assign_flow_data(bucket, perm, objects or {})
    set_box_bc(bucket, bc or {})
    return bucket


def unit_square_cell():
    areas = np.ones(4)
    normals = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
    centers = np.array([[0.0, 0.5], [1.0, 0.5], [0.5, 0.0], [0.5, 1.0]])
    return areas, normals, centers, np.ones(4), np.array([0.5, 0.5])


# -- two-point fluxes -------------------------------------------------------


def test_two_unit_cubes():
    bucket = box(3, (2, 1, 1), (2, 1, 1))
    (g,) = bucket.grids()
    data = bucket.data(g)["flow"]
    _, _, _, t = half_transmissibilities(g, data, 3)
    np.testing.assert_allclose(t, 2.0)
    A = tpfa_assemble(g, data, 3).matrix.toarray()
    np.testing.assert_allclose(A, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-14)


def _stacked_cubes(kappa):
    frac = Fracture("f", (0, 0, 1), (1, 1, 1))
    bucket = box(3, (1, 1, 2), (1, 1, 2), [frac])
    for e in bucket.edges():
        e.kappa = np.full(e.low.num_cells, float(kappa))
    return bucket


@pytest.mark.parametrize("kappa,expected", [(2.0, 1.0), (np.inf, 2.0), (0.0, 0.0), (6.0, 1.5)])
def test_interface_transmissibility(kappa, expected):
    bucket = _stacked_cubes(kappa)
    (e,) = bucket.edges()
    cpl = tpfa_coupling(e, bucket.data(e.high)["flow"], bucket.data(e.low)["flow"], 3)
    np.testing.assert_allclose(cpl.trans, expected)


def test_pure_neumann_single_cell_has_zero_row():
    bucket = box(3, (1, 1, 1), (1, 1, 1))
    (g,) = bucket.grids()
    disc = tpfa_assemble(g, bucket.data(g)["flow"], 3)
    assert disc.matrix.toarray().tolist() == [[0.0]]
    assert disc.rhs.tolist() == [0.0]


@pytest.mark.parametrize("scheme", ["tpfa", "vem"])
def test_column_linear_pressure(scheme):
    bucket = box(2, (1, 0.1), (10, 1), bc={"xmin": ("dirichlet", 1.0), "xmax": ("dirichlet", 0.0)})
    sol = solve_flow(bucket, scheme)
    (g,) = bucket.grids()
    np.testing.assert_allclose(sol.pressure[g], np.linspace(0.95, 0.05, 10), atol=1e-13)
    assert side_flux(bucket, sol, "xmax") == pytest.approx(0.1, rel=1e-12)


def test_neumann_inflow_matches_outflow():
    bucket = box(2, (2, 1), (4, 2), bc={"xmin": ("neumann", -0.5), "xmax": ("dirichlet", 0.0)})
    sol = solve_flow(bucket, "tpfa")
    assert side_flux(bucket, sol, "xmin") == pytest.approx(-0.5, rel=1e-12)
    assert side_flux(bucket, sol, "xmax") == pytest.approx(0.5, rel=1e-12)
    (g,) = bucket.grids()
    # p = 0.5 (2 - x) for unit permeability
    np.testing.assert_allclose(sol.pressure[g], 0.5 * (2 - g.cell_centers[:, 0]), atol=1e-13)


def test_source_with_pure_neumann_is_gauged():
    bucket = box(2, (1, 1), (3, 3))
    sol = solve_flow(bucket, "tpfa")
    (g,) = bucket.grids()
    assert sol.pressure[g][0] == 0.0
    np.testing.assert_allclose(sol.pressure[g], 0.0, atol=1e-15)


def test_figure1_matrix_structure():
    net = three_orthogonal_fractures()
    bucket = mesh_cartesian(net, (2, 2, 2))
    assign_flow_data(bucket, 1.0, {}, {"permeability": 100.0, "aperture": 1e-2})
    set_box_bc(bucket, {"xmin": ("dirichlet", 1.0), "xmax": ("dirichlet", 0.0)})
    system = assemble_global(bucket, "tpfa")
    assert system.matrix.shape == (27, 27)
    assert system.asymmetry() <= 1e-12 * abs(system.matrix).max()
    for d in (3, 2, 1, 0):
        for dd in (3, 2, 1, 0):
            block = extract_block(system, d, dd)
            if abs(d - dd) >= 2:
                assert block.nnz == 0
            elif abs(d - dd) == 1:
                assert block.nnz > 0


def test_vem_system_is_symmetric():
    bucket = mesh_cartesian(three_orthogonal_fractures(), (2, 2, 2))
    assign_flow_data(bucket, 1.0, {}, {"permeability": 100.0, "aperture": 1e-2})
    set_box_bc(bucket, {"xmin": ("dirichlet", 1.0), "xmax": ("neumann", 0.25)})
    system = assemble_global(bucket, "vem")
    assert system.asymmetry() <= 1e-12 * abs(system.matrix).max()


# -- mixed virtual elements ---------------------------------------------------


def test_vem_unit_square_consistency_pattern():
    areas, normals, centers, signs, xc = unit_square_cell()
    R, N = vem_projection_matrices(areas, normals, centers, signs, xc, np.eye(2))
    M0 = R @ R.T
    expected = 0.25 * np.array([[1, -1, 0, 0], [-1, 1, 0, 0], [0, 0, 1, -1], [0, 0, -1, 1]])
    np.testing.assert_allclose(M0, expected, atol=1e-15)
    M = vem_local(areas, normals, centers, signs, xc, 1.0, np.eye(2))
    np.testing.assert_allclose(M @ N, R, atol=1e-14)
    np.testing.assert_allclose(M, M.T, atol=1e-15)
    assert np.all(np.linalg.eigvalsh(M) > 0)


def test_vem_permeability_scaling():
    areas, normals, centers, signs, xc = unit_square_cell()
    M1 = vem_local(areas, normals, centers, signs, xc, 1.0, np.eye(2))
    M10 = vem_local(areas, normals, centers, signs, xc, 1.0, 10 * np.eye(2))
    np.testing.assert_allclose(M10, M1 / 10, atol=1e-15)


def test_vem_unit_square_block():
    bucket = box(2, (1, 1), (1, 1))
    (g,) = bucket.grids()
    disc = vem_assemble(g, bucket.data(g)["flow"], 2)
    A = disc.matrix.toarray()
    assert A.shape == (5, 5)
    np.testing.assert_allclose(A, A.T)
    assert np.all(A[4, :4] == -g.cell_faces.toarray()[:, 0])
    assert disc.fixed_faces.size == 4


def test_vem_two_cell_column():
    bucket = box(2, (1, 2), (1, 2), bc={"ymin": ("dirichlet", 1.0), "ymax": ("dirichlet", 0.0)})
    sol = solve_flow(bucket, "vem")
    (g,) = bucket.grids()
    np.testing.assert_allclose(sorted(sol.pressure[g]), [0.25, 0.75], atol=1e-14)
    vertical = np.abs(g.face_normals[:, 1]) > 0.5
    np.testing.assert_allclose(np.abs(sol.discharge[g][vertical]), 0.5, atol=1e-14)
    np.testing.assert_allclose(sol.discharge[g][~vertical], 0.0, atol=1e-14)


@pytest.mark.parametrize("scheme", ["tpfa", "vem"])
def test_zero_data_gives_zero_solution(scheme):
    frac = Fracture("f", (0, 0.5), (1, 0.5))
    bucket = box(2, (1, 1), (4, 4), [frac], bc={"xmin": ("dirichlet", 0.0)})
    sol = solve_flow(bucket, scheme)
    for g in bucket.grids():
        np.testing.assert_allclose(sol.pressure[g], 0.0, atol=1e-15)
        np.testing.assert_allclose(sol.discharge[g], 0.0, atol=1e-15)


# -- coupled problems -------------------------------------------------------


@pytest.mark.parametrize("scheme", ["tpfa", "vem"])
def test_fracture_sink_draws_symmetrically(scheme):
    frac = Fracture("f", (0, 0.5), (1, 0.5))
    bucket = box(2, (1, 1), (4, 4), [frac],
                 objects={"f": {"permeability": 10.0, "aperture": 1e-2, "source": -50.0}},
                 bc={"ymin": ("dirichlet", 1.0), "ymax": ("dirichlet", 1.0)})
    sol = solve_flow(bucket, scheme)
    (e,) = bucket.edges()
    lam = sol.interface_flux[e]
    assert np.all(lam > 0)
    below, above = (lam[e.sides == s][np.argsort(e.cells[e.sides == s])] for s in (-1, 1))
    np.testing.assert_allclose(below, above, rtol=1e-10)
    # total drawn equals the sink
    (f,) = bucket.nodes_of_dim(1)
    sink = 50.0 * f.cell_volumes.sum() * 1e-2
    assert lam.sum() == pytest.approx(sink, rel=1e-10)
    for r in cell_residuals(bucket, sol).values():
        assert np.abs(r).max() <= 1e-12


def test_kappa_values():
    assert kappa_from_data(1e-4, 1e-2) == pytest.approx(2e-2)
    assert kappa_from_data(1e4, 1e-2) == pytest.approx(2e6)
    assert kappa_from_data(1.0, np.inf) == 0.0
    with pytest.raises(NonPositiveInput):
        kappa_from_data(0.0, 1e-2)
    with pytest.raises(NonPositiveInput):
        kappa_from_data(1.0, -1.0)


def test_missing_kappa_is_reported():
    from mdflow.flow.data import edge_kappa

    bucket = box(2, (1, 1), (2, 2), [Fracture("f", (0, 0.5), (1, 0.5))])
    (e,) = bucket.edges()
    e.kappa = None
    with pytest.raises(MissingKappa):
        edge_kappa(e)


@pytest.mark.parametrize("scheme", ["tpfa", "vem"])
def test_barrier_throughput_decreases_with_kappa(scheme):
    frac = Fracture("f", (0.5, 0), (0.5, 1))
    fluxes = []
    for kappa in (1e3, 1e1, 1e-1, 1e-3):
        bucket = box(2, (1, 1), (4, 4), [frac],
                     objects={"f": {"permeability": 1e-2, "aperture": 1e-2, "kappa": kappa}},
                     bc={"xmin": ("dirichlet", 1.0), "xmax": ("dirichlet", 0.0)})
        fluxes.append(side_flux(bucket, solve_flow(bucket, scheme), "xmax"))
    assert all(a > b for a, b in zip(fluxes, fluxes[1:]))
    assert fluxes[-1] > 0


@pytest.mark.parametrize("scheme", ["tpfa", "vem"])
def test_sealed_interface_decouples_fracture(scheme):
    frac = Fracture("f", (0, 0.5), (1, 0.5))
    bucket = box(2, (1, 1), (4, 4), [frac],
                 objects={"f": {"permeability": 1e3, "aperture": 1e-2, "kappa": 0.0}},
                 bc={"xmin": ("dirichlet", 1.0), "xmax": ("dirichlet", 0.0)})
    sol = solve_flow(bucket, scheme)
    (e,) = bucket.edges()
    np.testing.assert_allclose(sol.interface_flux[e], 0.0, atol=1e-13)
    # both subdomains see the same linear profile as without the fracture
    for g in bucket.grids():
        np.testing.assert_allclose(sol.pressure[g], 1.0 - g.cell_centers[:, 0], atol=1e-12)
    throughput = 1.0 + 1e3 * 1e-2
    assert side_flux(bucket, sol, "xmax") == pytest.approx(throughput, rel=1e-12)


def test_uniform_flow_data_defaults():
    bucket = box(2, (1, 1), (2, 2))
    (g,) = bucket.grids()
    d = FlowData.uniform(g, permeability=3.0, aperture=0.5)
    np.testing.assert_allclose(d.specific_volume(g, 3), 0.5)
    np.testing.assert_allclose(d.scalar_normal_permeability(), 3.0)
    assert d.local_permeability(g).shape == (4, 2, 2)
