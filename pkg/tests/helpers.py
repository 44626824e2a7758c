"""Independent oracles and mesh builders shared by the tests."""
from __future__ import annotations

import itertools

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla


def dense_gauss_solve(A, b):
    """Gaussian elimination with partial pivoting on a dense copy."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if p != k:
            A[[k, p]] = A[[p, k]]
            b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            m = A[i, k] / A[k, k]
            A[i, k:] -= m * A[k, k:]
            b[i] -= m * b[k]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - A[i, i + 1:] @ x[i + 1:]) / A[i, i]
    return x


def tensor_tpfa_2d(xs, ys, perm, dirichlet):
    """Cell-centred two-point solve on the rectilinear grid ``xs`` x ``ys``.

    ``perm`` is an (nx, ny) array of isotropic permeabilities. ``dirichlet``
    maps ``"xmin"``... to a function of the face midpoint (x, y) giving the
    boundary pressure; unlisted sides are no-flow. Returns (nx, ny)
    pressures and the cell centres.
    """
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    nx, ny = xs.size - 1, ys.size - 1
    dx, dy = np.diff(xs), np.diff(ys)
    xc, yc = 0.5 * (xs[1:] + xs[:-1]), 0.5 * (ys[1:] + ys[:-1])
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []
    rhs = np.zeros(nx * ny)

    def couple(i, j, T):
        rows.extend([i, j, i, j])
        cols.extend([i, j, j, i])
        vals.extend([T, T, -T, -T])

    for i in range(nx):
        for j in range(ny):
            if i + 1 < nx:
                T = dy[j] / (0.5 * dx[i] / perm[i, j] + 0.5 * dx[i + 1] / perm[i + 1, j])
                couple(idx[i, j], idx[i + 1, j], T)
            if j + 1 < ny:
                T = dx[i] / (0.5 * dy[j] / perm[i, j] + 0.5 * dy[j + 1] / perm[i, j + 1])
                couple(idx[i, j], idx[i, j + 1], T)
    sides = {
        "xmin": [(idx[0, j], dy[j], 0.5 * dx[0], (xs[0], yc[j])) for j in range(ny)],
        "xmax": [(idx[-1, j], dy[j], 0.5 * dx[-1], (xs[-1], yc[j])) for j in range(ny)],
        "ymin": [(idx[i, 0], dx[i], 0.5 * dy[0], (xc[i], ys[0])) for i in range(nx)],
        "ymax": [(idx[i, -1], dx[i], 0.5 * dy[-1], (xc[i], ys[-1])) for i in range(nx)],
    }
    for side, fun in dirichlet.items():
        for c, area, dist, mid in sides[side]:
            i, j = np.unravel_index(c, (nx, ny))
            T = area * perm[i, j] / dist
            rows.append(c)
            cols.append(c)
            vals.append(T)
            rhs[c] += T * fun(*mid)
    A = sps.csr_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))
    p = spla.spsolve(A.tocsc(), rhs)
    return p.reshape(nx, ny), (xc, yc)


# --------------------------------------------------------------------------
# simplex meshes in the mdmesh dictionary format


def _simplex_grid_dict(nodes, simplices, gid=0, name="matrix"):
    dim = simplices.shape[1] - 1
    face_id = {}
    face_nodes = []
    cell_faces = []
    for cell in simplices:
        entries = []
        for drop in range(dim + 1):
            fn = tuple(int(n) for k, n in enumerate(cell) if k != drop)
            key = tuple(sorted(fn))
            if key in face_id:
                entries.append([face_id[key], -1])
            else:
                face_id[key] = len(face_nodes)
                face_nodes.append(list(fn))
                entries.append([face_id[key], 1])
        cell_faces.append(entries)
    return {"id": gid, "dim": dim, "name": name, "parents": [], "nodes": np.asarray(nodes).tolist(),
            "face_nodes": face_nodes, "cell_faces": cell_faces}


def perturbed_simplex_mesh(dim, n, amplitude=0.25, seed=0):
    """Conforming simplex mesh of the unit square/cube with jiggled interior nodes.

    Every lattice cell is split into 2 triangles or 6 (Kuhn) tetrahedra;
    interior nodes are moved by up to ``amplitude`` times the lattice
    spacing in each direction.
    """
    rng = np.random.default_rng(seed)
    h = 1.0 / n
    grid = np.array(list(itertools.product(range(n + 1), repeat=dim)))
    nodes = grid * h
    interior = np.all((grid > 0) & (grid < n), axis=1)
    nodes[interior] += rng.uniform(-amplitude, amplitude, (int(interior.sum()), dim)) * h
    index = {tuple(p): i for i, p in enumerate(grid)}
    simplices = []
    for base in itertools.product(range(n), repeat=dim):
        base = np.array(base)
        for perm in itertools.permutations(range(dim)):
            path = [base.copy()]
            cur = base.copy()
            for ax in perm:
                cur = cur.copy()
                cur[ax] += 1
                path.append(cur)
            simplices.append([index[tuple(p)] for p in path])
    mesh = {"format": "mdmesh", "version": 1, "ambient_dim": dim,
            "grids": [_simplex_grid_dict(nodes, np.array(simplices))], "edges": []}
    return mesh


def random_simplices(dim, count, seed=0):
    """``count`` disjoint, randomly perturbed simplices as one grid."""
    rng = np.random.default_rng(seed)
    ref = np.vstack([np.zeros(dim), np.eye(dim)])
    nodes, simplices = [], []
    for k in range(count):
        shift = np.zeros(dim)
        shift[0], shift[1] = 2.0 * (k % 10), 2.0 * (k // 10)
        pts = ref + rng.uniform(-0.3, 0.3, ref.shape)
        # keep a positive orientation so the cell is not degenerate
        if np.linalg.det(pts[1:] - pts[0]) < 0:
            pts[[1, 2]] = pts[[2, 1]]
        start = len(nodes)
        nodes.extend((pts + shift).tolist())
        simplices.append(list(range(start, start + dim + 1)))
    return {"format": "mdmesh", "version": 1, "ambient_dim": dim,
            "grids": [_simplex_grid_dict(np.array(nodes), np.array(simplices))], "edges": []}


def two_triangle_mesh():
    """Unit square cut along its diagonal by a one-segment fracture.

    The diagonal face is stored once per triangle (split), and the edge maps
    both copies onto the single fracture cell.
    """
    square = {
        "id": "rock", "dim": 2, "name": "matrix", "parents": [],
        "nodes": [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        "face_nodes": [[0, 1], [1, 2], [2, 0], [2, 3], [3, 0], [0, 2]],
        "cell_faces": [[[0, 1], [1, 1], [2, 1]], [[5, 1], [3, 1], [4, 1]]],
    }
    frac = {
        "id": "diag", "dim": 1, "name": "diagonal", "parents": [],
        "nodes": [[0.0, 0.0], [1.0, 1.0]],
        "face_nodes": [[0], [1]],
        "cell_faces": [[[0, 1], [1, 1]]],
    }
    return {"format": "mdmesh", "version": 1, "ambient_dim": 2,
            "grids": [square, frac],
            "edges": [{"high": "rock", "low": "diag", "map": [[2, 0, -1], [5, 0, 1]]}]}
