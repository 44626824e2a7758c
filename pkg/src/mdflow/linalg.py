"""Sparse matrix plumbing and the direct solver.

Matrices are ``scipy.sparse.csr_matrix`` instances; the factorization is
SuperLU with a fixed COLAMD column ordering.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from mdflow.errors import IndexOutOfRange, SingularSystem, UnknownBlock
from mdflow.grid import DofMap, Grid

logger = logging.getLogger(__name__)

SINGULAR_PIVOT = 1e-14


def from_triplets(n: int, m: int, entries) -> sps.csr_matrix:
    """Compressed-row matrix from (row, col, value) triplets; duplicates are summed.

    ``entries`` is either an iterable of triplets or a tuple of three arrays.
    """
    if isinstance(entries, tuple) and len(entries) == 3 and not np.isscalar(entries[0]):
        rows, cols, vals = (np.asarray(x) for x in entries)
    else:
        entries = list(entries)
        if entries:
            rows, cols, vals = (np.asarray(x) for x in zip(*entries))
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
    rows = rows.astype(np.int64, copy=False)
    cols = cols.astype(np.int64, copy=False)
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m):
        raise IndexOutOfRange(f"triplet index outside a {n}x{m} matrix")
    A = sps.coo_matrix((vals.astype(float), (rows, cols)), shape=(n, m)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass
class BlockSystem:
    matrix: sps.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap

    def __post_init__(self) -> None:
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n) or self.rhs.shape != (n,):
            raise ValueError("block system must be square with a matching rhs")
        if self.dofmap.num_dofs != n:
            raise ValueError("dof map does not cover the matrix")

    def residual(self, x: np.ndarray) -> float:
        """Relative residual ``|Ax - b| / |b|`` (absolute if ``b`` vanishes)."""
        r = np.linalg.norm(self.matrix @ x - self.rhs)
        nb = np.linalg.norm(self.rhs)
        return float(r / nb) if nb > 0 else float(r)

    def asymmetry(self) -> float:
        d = self.matrix - self.matrix.T
        return float(abs(d).max()) if d.nnz else 0.0


def _block_slice(system: BlockSystem, key: Union[Grid, int, slice]) -> slice:
    if isinstance(key, slice):
        return key
    if isinstance(key, Grid):
        try:
            return system.dofmap.block(key)
        except KeyError:
            raise UnknownBlock(f"{key!r} has no block") from None
    if isinstance(key, (int, np.integer)):
        s = system.dofmap.dim_block(int(key))
        if s.stop == s.start:
            raise UnknownBlock(f"no grids of dimension {key}")
        return s
    raise UnknownBlock(f"cannot interpret block key {key!r}")


def extract_block(system: BlockSystem, row_block, col_block) -> sps.csr_matrix:
    """Sub-matrix between two blocks, in block-local indices.

    A block is named by a grid (its node block) or by an integer
    dimension (all grids of that dimension, which are contiguous).
    """
    rs, cs = _block_slice(system, row_block), _block_slice(system, col_block)
    return system.matrix[rs, cs].tocsr()


def _norm1(A: sps.spmatrix) -> float:
    return float(abs(A).sum(axis=0).max()) if A.nnz else 0.0


def solve_direct(system_or_matrix, rhs=None, refine: int = 2) -> np.ndarray:
    """Solve by sparse LU with partial pivoting.

    Accepts a :class:`BlockSystem` or a matrix plus right-hand side. A
    couple of steps of iterative refinement are applied when they lower the
    residual.
    """
    if isinstance(system_or_matrix, BlockSystem):
        A, b = system_or_matrix.matrix, system_or_matrix.rhs
    else:
        A, b = system_or_matrix, np.asarray(rhs, dtype=float)
    A = sps.csr_matrix(A, dtype=float)
    lu = factorize(A)
    x = lu.solve(b)
    nb = np.linalg.norm(b)
    r = b - A @ x
    for _ in range(refine):
        if nb == 0 or np.linalg.norm(r) <= 1e-15 * nb:
            break
        x_new = x + lu.solve(r)
        r_new = b - A @ x_new
        if np.linalg.norm(r_new) >= np.linalg.norm(r):
            break
        x, r = x_new, r_new
    return x


class Factorization:
    """LU factors of ``S A S`` where ``S`` is a diagonal row/column scaling."""

    def __init__(self, lu, scale: np.ndarray) -> None:
        self._lu = lu
        self.scale = scale

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self.scale * self._lu.solve(self.scale * np.asarray(b, dtype=float))


def factorize(A: sps.spmatrix) -> Factorization:
    """Scaled SuperLU factorization.

    The matrix is symmetrically equilibrated by the square root of its row
    maxima, which keeps symmetric systems symmetric and makes the pivot
    threshold relative to unit-scale entries. Raises
    :class:`SingularSystem` when a pivot falls below ``1e-14 * |SAS|_1``.
    """
    A = sps.csr_matrix(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 0:
        raise SingularSystem("empty system")
    rowmax = np.asarray(abs(A).max(axis=1).todense()).ravel()
    if np.any(rowmax == 0):
        raise SingularSystem(f"{int(np.sum(rowmax == 0))} empty rows")
    scale = 1.0 / np.sqrt(rowmax)
    S = sps.diags(scale)
    As = sps.csc_matrix(S @ A @ S)
    try:
        lu = spla.splu(As, permc_spec="COLAMD", options={"Equil": False})
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from None
    pivots = np.abs(lu.U.diagonal())
    threshold = SINGULAR_PIVOT * _norm1(As)
    if np.any(pivots <= threshold):
        raise SingularSystem(f"pivot below {threshold:.3e}")
    return Factorization(lu, scale)


def export_matrix_market(A: sps.spmatrix, path) -> None:
    scipy.io.mmwrite(str(path), sps.coo_matrix(A), field="real", symmetry="general")
