"""
Sparse assembly of the least-squares collocation matrix A, the collocation mass matrix M
and the load vector, plus the sparsity pattern of A^T A
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.io
import scipy.sparse as sp

from .errors import DimensionMismatchError
from .geometry import eval_map, physical_laplacian
from .plotting_utils import echo_lines, write_table
from .spline_core import tensor_basis, univariate_ders

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """
    Assembled IGA-L system for homogeneous Dirichlet Poisson

    Columns of A and M follow basis_map (flat tensor indices of the interior
    basis functions); rows follow point_map (indices into points.points).
    """
    A: sp.csr_matrix
    M: sp.csr_matrix
    b: np.ndarray
    basis_map: np.ndarray
    point_map: np.ndarray
    space: object
    patch: object
    points: object
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.A.shape

    @property
    def dof(self):
        return self.A.shape[1]


def interior_basis_map(space):
    """
    Flat indices of the basis functions that survive Dirichlet elimination

    Returns:
    (basis_map, column_of) where column_of[flat index] is the matrix column or -1
    """
    interior_ranges = [np.arange(1, N - 1) for N in space.shape]
    grids = np.meshgrid(*interior_ranges, indexing="ij")
    basis_map = np.ravel_multi_index(tuple(g.ravel() for g in grids), space.shape)
    column_of = np.full(space.num_basis, -1, dtype=np.int64)
    column_of[basis_map] = np.arange(len(basis_map))
    return basis_map, column_of


def zero_source(xi, jet):
    return 0.0


def physical_source(f):
    """Wrap f(x) on the physical domain as an assembly source"""
    def source(xi, jet):
        return f(jet.x)
    return source


def _univariate_cache(space, points):
    """Second-order univariate evaluations at every 1D coordinate of the tensor grid"""
    return [
        [univariate_ders(kv, x, max_deriv=2) for x in coords]
        for kv, coords in zip(space.knot_vectors, points.per_dir)
    ]


def assemble(space, patch, points, source=None, threads=1):
    """
    Assemble A, M and b on the interior collocation points

    A_ji = -Laplacian(N_i o G^-1)(G(xi_j)), M_ji = N_i(xi_j) and b_j = f(G(xi_j)),
    restricted to interior basis functions and interior points.

    Parameters:
    space: solution NurbsSpace
    patch: GeometryPatch with the same dimension
    points: CollocationSet built for this space
    source: callable (xi, jet) -> float, or None for f = 0
    threads: worker threads over rows

    Returns:
    DiscreteSystem
    """
    if not space.dim == patch.dim == points.dim:
        raise DimensionMismatchError(
            f"space is {space.dim}-d, patch is {patch.dim}-d, points are {points.dim}-d"
        )
    source = source or zero_source
    start_time = time.perf_counter()

    basis_map, column_of = interior_basis_map(space)
    cache = _univariate_cache(space, points)
    rows = [np.unravel_index(j, points.counts) for j in points.interior]

    def assemble_row(multi_index):
        univariate = [cache[a][i] for a, i in enumerate(multi_index)]
        basis = tensor_basis(space, univariate, max_deriv=2)
        xi = np.array([points.per_dir[a][i] for a, i in enumerate(multi_index)])
        jet = eval_map(patch, xi)
        lap = physical_laplacian(jet, basis.grad, basis.hess)
        cols = column_of[basis.indices]
        keep = cols >= 0
        return cols[keep], -lap[keep], basis.values[keep], float(source(xi, jet))

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(assemble_row, rows))
    else:
        results = [assemble_row(r) for r in rows]

    lengths = np.array([len(r[0]) for r in results], dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(lengths)])
    empty = np.empty(0)
    indices = np.concatenate([r[0] for r in results] or [empty]).astype(np.int64)
    a_data = np.concatenate([r[1] for r in results] or [empty])
    m_data = np.concatenate([r[2] for r in results] or [empty])
    b = np.array([r[3] for r in results], dtype=float)

    shape = (points.m_in, len(basis_map))
    A = sp.csr_matrix((a_data, indices, indptr), shape=shape)
    M = sp.csr_matrix((m_data, indices.copy(), indptr.copy()), shape=shape)

    kv = space.knot_vectors[0]
    meta = {
        "domain": patch.tag,
        "d": space.dim,
        "p": kv.degree,
        "n": kv.n,
        "h": kv.h,
        "k": kv.regularity,
        "scheme": points.scheme,
        "dof": shape[1],
        "m": points.m,
        "m_in": points.m_in,
    }
    logger.info(
        "assembled %s p=%d n=%d k=%d %s: %d x %d, nnz=%d in %.3f s",
        patch.tag, kv.degree, kv.n, kv.regularity, points.scheme,
        shape[0], shape[1], A.nnz, time.perf_counter() - start_time,
    )
    return DiscreteSystem(
        A=A, M=M, b=b,
        basis_map=basis_map,
        point_map=np.asarray(points.interior),
        space=space, patch=patch, points=points,
        meta=meta,
    )


def normal_product_pattern(A):
    """
    Structural sparsity of A^T A

    Every stored entry of A counts as nonzero, so no cancellation is assumed.

    Returns:
    (nnz, pattern) with pattern a boolean CSR matrix of shape (ncols, ncols)
    """
    P = sp.csr_matrix(A, copy=True)
    P.data = np.ones_like(P.data)
    product = (P.T @ P).tocsr()
    product.sort_indices()
    pattern = sp.csr_matrix(
        (np.ones(product.nnz, dtype=bool), product.indices, product.indptr),
        shape=product.shape,
    )
    return int(product.nnz), pattern


def matrix_density(nnz, ncols):
    """Fraction of an ncols x ncols pattern that is occupied"""
    return nnz / float(ncols) ** 2 if ncols else 0.0


def export_matrix_market(matrix, path, echo=None):
    """Matrix Market coordinate file with 17 significant digits and the config as comments"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    comment = "\n".join(line[2:] for line in echo_lines(echo))
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), comment=comment, precision=17)
    logger.debug("matrix %s with nnz=%d exported to %s", matrix.shape, matrix.nnz, path)
    return path


def export_occupancy_csv(pattern, path, echo=None):
    """Occupied (row, col) pairs of a sparsity pattern"""
    coo = sp.coo_matrix(pattern)
    frame = pd.DataFrame({"row": coo.row, "col": coo.col}).sort_values(["row", "col"])
    return write_table(frame, path, echo)
