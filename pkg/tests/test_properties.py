"""Property tests of the invariants that hold for any admissible input."""
import numpy as np
import scipy.sparse as sps
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from helpers import random_simplices
from mdflow.flow import assemble_global, cell_residuals, set_box_bc, solve_flow
from mdflow.flow.data import assign_flow_data
from mdflow.geometry import Fracture, FractureNetwork, mesh_cartesian, second_moment_identity
from mdflow.io.meshio import bucket_from_dict, bucket_to_dict
from mdflow.linalg import from_triplets
from mdflow.transport import TransportData, advance, initial_state, step_mass_defect, upwind_assemble

SETTINGS = settings(max_examples=25, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])

log_value = st.floats(min_value=-4, max_value=4).map(lambda e: 10.0 ** e)


@st.composite
def fractured_squares(draw):
    """Unit square on an n x n lattice with spanning axis-parallel fractures."""
    n = draw(st.sampled_from([4, 6, 8]))
    lines = st.integers(min_value=1, max_value=n - 1)
    xs = draw(st.lists(lines, max_size=2, unique=True))
    ys = draw(st.lists(lines, max_size=2, unique=True))
    fracs = [Fracture(f"v{i}", (i / n, 0.0), (i / n, 1.0)) for i in xs]
    fracs += [Fracture(f"h{j}", (0.0, j / n), (1.0, j / n)) for j in ys]
    objects = {f.id: {"permeability": draw(log_value), "aperture": draw(log_value) * 1e-3}
               for f in fracs}
    bucket = mesh_cartesian(FractureNetwork(2, (0, 0), (1, 1), fracs), (n, n))
    assign_flow_data(bucket, draw(log_value), objects)
    p_in, p_out = draw(st.floats(0, 1)), draw(st.floats(0, 1))
    sides = draw(st.sampled_from([("xmin", "xmax"), ("ymin", "ymax"), ("xmin", "ymax")]))
    set_box_bc(bucket, {sides[0]: ("dirichlet", p_in), sides[1]: ("dirichlet", p_out)})
    return bucket, (min(p_in, p_out), max(p_in, p_out))


@SETTINGS
@given(case=fractured_squares(), scheme=st.sampled_from(["tpfa", "vem"]))
def test_flow_is_locally_conservative(case, scheme):
    bucket, _ = case
    sol = solve_flow(bucket, scheme)
    # largest discharge, or the round-off level of |A| |x| when nothing flows
    scale = max(max(float(np.abs(q).max(initial=0.0)) for q in sol.discharge.values()),
                float(abs(sol.system.matrix).max() * np.abs(sol.x).max()))
    for r in cell_residuals(bucket, sol).values():
        assert np.abs(r).max(initial=0.0) <= 1e-9 * scale


@SETTINGS
@given(case=fractured_squares(), scheme=st.sampled_from(["tpfa", "vem"]))
def test_global_matrix_is_symmetric(case, scheme):
    bucket, _ = case
    A = assemble_global(bucket, scheme).matrix
    assert abs(A - A.T).max() <= 1e-12 * abs(A).max()


@SETTINGS
@given(case=fractured_squares())
def test_two_point_pressure_obeys_the_maximum_principle(case):
    bucket, (lo, hi) = case
    sol = solve_flow(bucket, "tpfa")
    tol = 1e-10 * max(1.0, hi)
    for p in sol.pressure.values():
        assert p.min() >= lo - tol and p.max() <= hi + tol


@SETTINGS
@given(case=fractured_squares(), c_in=st.floats(0, 1), c0=st.floats(0, 1))
def test_tracer_stays_bounded_and_conserved(case, c_in, c0):
    bucket, _ = case
    sol = solve_flow(bucket, "tpfa")
    inflow = {s: c_in for s in ("xmin", "xmax", "ymin", "ymax")}
    data = TransportData.uniform(bucket, 0.05, 0.2, inflow=inflow, initial=c0)
    system = upwind_assemble(bucket, sol, data)
    lo, hi = min(c_in, c0), max(c_in, c0)
    defects = []

    def monitor(old, new, dt):
        defects.append(step_mass_defect(system, old, new, dt))
        assert new.concentration.min() >= lo - 1e-12
        assert new.concentration.max() <= hi + 1e-12

    advance(bucket, initial_state(bucket, data), system, data, monitor)
    assert max(defects) <= 1e-10


@SETTINGS
@given(dim=st.sampled_from([2, 3]), seed=st.integers(0, 2**32 - 1))
def test_geometric_identity_on_random_simplices(dim, seed):
    bucket = bucket_from_dict(random_simplices(dim, 20, seed), None, 1e-10)
    (g,) = bucket.grids()
    dev = np.abs(second_moment_identity(g) - np.eye(dim)).max()
    assert dev <= 1e-12


@SETTINGS
@given(case=fractured_squares())
def test_mesh_roundtrip_preserves_the_bucket(case):
    bucket, _ = case
    back = bucket_from_dict(bucket_to_dict(bucket), bucket.domain, 1e-10)
    for g, h in zip(bucket.grids(), back.grids()):
        assert g.name == h.name
        np.testing.assert_allclose(g.cell_volumes, h.cell_volumes, rtol=1e-14)
        assert (g.cell_faces != h.cell_faces).nnz == 0
    for e, f in zip(bucket.edges(), back.edges()):
        np.testing.assert_array_equal(e.faces, f.faces)
        np.testing.assert_array_equal(e.sides, f.sides)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 4), st.integers(-8, 8)), max_size=40))
def test_triplet_assembly_sums_entries(entries):
    A = from_triplets(6, 5, [(r, c, float(v)) for r, c, v in entries])
    dense = np.zeros((6, 5))
    for r, c, v in entries:
        dense[r, c] += v
    assert isinstance(A, sps.csr_matrix)
    np.testing.assert_array_equal(A.toarray(), dense)
