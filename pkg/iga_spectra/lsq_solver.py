"""
Least-squares solution of the collocation system and manufactured-solution checks
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.sparse.linalg import splu

from .assembly import interior_basis_map
from .constants import DENSE_THRESHOLD, RANK_TOL
from .errors import DimensionMismatchError, DomainError, FactorizationError, RankDeficiencyError
from .geometry import map_point, physical_laplacian
from .plotting_utils import write_table
from .spline_core import eval_nurbs

logger = logging.getLogger(__name__)

DENSE_QR = "dense_qr"
NORMAL_EQUATIONS = "normal_equations"


@dataclass(frozen=True, eq=False)
class Solution:
    coefficients: np.ndarray
    residual_norm: float
    method: str
    basis_map: np.ndarray
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ManufacturedCase:
    """
    Exact solution u = g o G^-1 with g a product of one 1D profile per direction

    g(xi) = prod_a phi(xi_a); profile returns (phi, phi', phi'') at an array of coordinates.
    """
    name: str
    profile: object

    def exact(self, xi):
        phi, _, _ = self.profile(np.atleast_1d(np.asarray(xi, dtype=float)))
        return float(np.prod(phi))

    def derivatives(self, xi):
        """Parametric gradient and Hessian of g at xi"""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        d = len(xi)
        table = np.stack(self.profile(xi))        # shape (3, d)
        grad = np.empty(d)
        hess = np.empty((d, d))
        for a in range(d):
            for b in range(d):
                orders = [(c == a) + (c == b) for c in range(d)]
                hess[a, b] = np.prod([table[o, c] for c, o in enumerate(orders)])
            grad[a] = np.prod([table[int(c == a), c] for c in range(d)])
        return grad, hess

    def source(self, xi, jet):
        """f = -Laplacian(u) at G(xi)"""
        grad, hess = self.derivatives(xi)
        return -physical_laplacian(jet, grad, hess)


def _zero_profile(x):
    z = np.zeros_like(x)
    return z, z, z


def _polynomial_profile(x):
    return x * (1.0 - x), 1.0 - 2.0 * x, np.full_like(x, -2.0)


def _sine_profile(x):
    return np.sin(np.pi * x), np.pi * np.cos(np.pi * x), -np.pi ** 2 * np.sin(np.pi * x)


MANUFACTURED_CASES = {
    "zero": ManufacturedCase("zero", _zero_profile),
    "polynomial": ManufacturedCase("polynomial", _polynomial_profile),
    "sine": ManufacturedCase("sine", _sine_profile),
}


def get_case(name):
    try:
        return MANUFACTURED_CASES[name]
    except KeyError:
        raise DomainError(f"unknown manufactured case '{name}', expected one of {sorted(MANUFACTURED_CASES)}") from None


def _solve_dense_qr(A, b):
    rows, cols = A.shape
    if rows < cols:
        raise RankDeficiencyError(f"{rows} equations for {cols} unknowns")
    Q, R = scipy.linalg.qr(A.toarray(), mode="economic")
    diag = np.abs(np.diag(R))
    if not diag.max() > 0.0 or diag.min() < RANK_TOL * diag.max():
        raise RankDeficiencyError(
            f"R diagonal spans [{diag.min():.3e}, {diag.max():.3e}]; A is numerically rank deficient"
        )
    return scipy.linalg.solve_triangular(R, Q.T @ b)


def _solve_normal_equations(A, b):
    N = (A.T @ A).tocsc()
    try:
        lu = splu(N)
    except RuntimeError as exc:
        raise FactorizationError(f"factorization of A^T A failed: {exc}") from exc
    u = lu.solve(A.T @ b)
    if not np.all(np.isfinite(u)):
        raise FactorizationError("normal-equations solve produced non-finite coefficients")
    return u


def solve_least_squares(system, dense_threshold=DENSE_THRESHOLD):
    """
    Minimize |A u - b| for an assembled system

    Dense QR when the column count is at or below dense_threshold, otherwise
    a sparse LU factorization of the normal equations A^T A u = A^T b.

    Returns:
    Solution
    """
    A, b = system.A, system.b
    if A.shape[1] <= dense_threshold:
        u, method = _solve_dense_qr(A, b), DENSE_QR
    else:
        u, method = _solve_normal_equations(A, b), NORMAL_EQUATIONS

    residual = float(np.linalg.norm(A @ u - b))
    logger.info("%s solve of %s system: residual %.3e", method, A.shape, residual)
    return Solution(
        coefficients=u,
        residual_norm=residual,
        method=method,
        basis_map=system.basis_map,
        meta=dict(system.meta),
    )


def eval_solution(space, patch, u, xi):
    """
    U_h at a parametric point, summing over the interior basis only

    Parameters:
    space: solution NurbsSpace
    patch: GeometryPatch (checked for dimension)
    u: Solution or interior coefficient vector
    xi: parametric point

    Returns:
    float
    """
    if patch.dim != space.dim:
        raise DimensionMismatchError(f"{patch.dim}-d patch for a {space.dim}-d space")
    coefficients = u.coefficients if isinstance(u, Solution) else np.asarray(u, dtype=float)
    basis_map, _ = interior_basis_map(space)
    if len(coefficients) != len(basis_map):
        raise DimensionMismatchError(f"{len(coefficients)} coefficients for {len(basis_map)} interior functions")
    full = np.zeros(space.num_basis)
    full[basis_map] = coefficients
    basis = eval_nurbs(space, xi)
    return float(basis.values @ full[basis.indices])


def sample_grid(d, samples):
    """Uniform parametric grid with `samples` points per direction, boundary included"""
    axis = np.linspace(0.0, 1.0, samples)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def max_error(solution, space, patch, case, samples=21):
    """Largest |U_h - u| over a uniform parametric sample grid"""
    case = get_case(case) if isinstance(case, str) else case
    return max(
        abs(eval_solution(space, patch, solution, xi) - case.exact(xi))
        for xi in sample_grid(space.dim, samples)
    )


def write_solution_csv(solution, path, echo=None):
    frame = pd.DataFrame({
        "index": solution.basis_map,
        "coefficient": solution.coefficients,
    })
    return write_table(frame, path, echo)


def write_samples_csv(solution, space, patch, path, samples=21, echo=None):
    """U_h on a uniform parametric grid with the physical coordinates of each sample"""
    d = space.dim
    rows = []
    for xi in sample_grid(d, samples):
        rows.append([*xi, *map_point(patch, xi), eval_solution(space, patch, solution, xi)])
    columns = [f"xi_{a + 1}" for a in range(d)] + [f"x_{a + 1}" for a in range(d)] + ["u_h"]
    return write_table(pd.DataFrame(rows, columns=columns), path, echo)
