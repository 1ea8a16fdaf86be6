"""
Greville, superconvergent (SC) and Cauchy-Galerkin (CG) collocation points
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .constants import (
    BOUNDARY_TOL,
    SC_DEDUPE_TOL,
    SC_MAX_DEGREE,
    SC_MIN_DEGREE,
    SC_REFERENCE_POINTS,
    SCHEMES,
)
from .errors import DomainError, UnsupportedDegreeError
from .plotting_utils import write_table
from .spline_core import build_knot_vector, greville_abscissae

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CollocationSet:
    """
    Tensor grid of parametric collocation points

    points are sorted lexicographically; interior and boundary hold row
    indices into points and partition them.
    """
    scheme: str
    points: np.ndarray          # shape (m, d)
    interior: np.ndarray
    boundary: np.ndarray
    per_dir: tuple              # sorted 1D coordinate arrays, one per direction

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def m(self):
        return self.points.shape[0]

    @property
    def m_in(self):
        return len(self.interior)

    @property
    def counts(self):
        return tuple(len(c) for c in self.per_dir)


def greville_points(p, m_dir):
    """
    Greville abscissae of an auxiliary open uniform C^{p-1} knot vector with m_dir - p spans

    Returns:
    numpy array of m_dir points including 0 and 1
    """
    if m_dir <= p:
        raise DomainError(f"need more than p={p} points per direction, got m={m_dir}")
    aux = build_knot_vector(p, m_dir - p, p - 1)
    return greville_abscissae(aux)


def _check_sc_degree(p):
    if not SC_MIN_DEGREE <= p <= SC_MAX_DEGREE:
        raise UnsupportedDegreeError(
            f"superconvergent points are tabulated for {SC_MIN_DEGREE} <= p <= {SC_MAX_DEGREE}, got p={p}"
        )


def _span_images(p, kv):
    """Reference points mapped affinely into every knot span, shape (n, n_ref)"""
    ref = np.asarray(SC_REFERENCE_POINTS[p])
    breaks = kv.breaks
    a, b = breaks[:-1, None], breaks[1:, None]
    return a + (ref[None, :] + 1.0) * 0.5 * (b - a)


def _dedupe(values, tol):
    values = np.sort(values)
    keep = np.concatenate([[True], np.diff(values) > tol])
    return values[keep]


def sc_points(p, kv):
    """
    Superconvergent points of degree p mapped into each span of kv

    Points shared by adjacent spans (reference +-1 for even p) are merged.
    """
    _check_sc_degree(p)
    images = _span_images(p, kv)
    return _dedupe(images.ravel(), SC_DEDUPE_TOL)


def cg_points(p, kv):
    """
    One superconvergent point per knot span, symmetric about 0.5

    Odd p: spans alternate between the left and right member of their SC pair,
    starting with the left member in the first span and mirrored from the
    other end; an odd middle span keeps its left member.
    Even p: every span keeps its reference-0 point (the span midpoint).
    """
    _check_sc_degree(p)
    images = _span_images(p, kv)
    n = images.shape[0]

    if p % 2 == 0:
        middle = SC_REFERENCE_POINTS[p].index(0.0)
        return np.sort(images[:, middle])

    chosen = np.empty(n)
    for i in range(n // 2):
        member = i % 2            # 0 = left, 1 = right
        chosen[i] = images[i, member]
        chosen[n - 1 - i] = images[n - 1 - i, 1 - member]
    if n % 2 == 1:
        chosen[n // 2] = images[n // 2, 0]
    return np.sort(chosen)


def tensorize(per_dir, scheme="greville"):
    """
    Full tensor grid of the given 1D point lists with the interior/boundary partition

    A point is on the boundary iff any coordinate is 0 or 1 within 1e-14.
    """
    per_dir = tuple(np.asarray(c, dtype=float) for c in per_dir)
    grids = np.meshgrid(*per_dir, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    on_edge = (points <= BOUNDARY_TOL) | (points >= 1.0 - BOUNDARY_TOL)
    is_boundary = on_edge.any(axis=1)
    return CollocationSet(
        scheme=scheme,
        points=points,
        interior=np.flatnonzero(~is_boundary),
        boundary=np.flatnonzero(is_boundary),
        per_dir=per_dir,
    )


def oversampled_count(N_dir, factor, d=1):
    """
    Points per direction so that the total is about factor times the basis count

    Returns:
    ceil(factor^(1/d) * N_dir)
    """
    if factor < 1.0:
        raise DomainError(f"oversampling factor must be >= 1, got {factor}")
    # rounding guards exact products such as 4**(1/2) * 20 against ulp drift
    return int(math.ceil(round(factor ** (1.0 / d) * N_dir, 9)))


def _greville_direction(kv, m_dir):
    # square sets use the solution knots; a C^k space with k < p-1 needs p-1 points per span
    if m_dir == kv.num_basis:
        return greville_abscissae(kv)
    return greville_points(kv.degree, m_dir)


def build_collocation_set(scheme, space, factor=1.0):
    """
    Collocation set for a solution space

    Without oversampling the Greville set is the classical one of the solution
    knot vector; oversampled sets come from the auxiliary C^{p-1} construction.

    Parameters:
    scheme: 'greville', 'sc' or 'cg'
    space: NurbsSpace of the solution
    factor: total oversampling factor (greville only)

    Returns:
    CollocationSet
    """
    if scheme == "greville":
        per_dir = [_greville_direction(kv, oversampled_count(kv.num_basis, factor, space.dim))
                   for kv in space.knot_vectors]
    elif scheme == "sc":
        per_dir = [sc_points(kv.degree, kv) for kv in space.knot_vectors]
    elif scheme == "cg":
        per_dir = [cg_points(kv.degree, kv) for kv in space.knot_vectors]
    else:
        raise DomainError(f"unknown collocation scheme '{scheme}', expected one of {SCHEMES}")

    points = tensorize(per_dir, scheme)
    logger.debug("%s collocation set: counts=%s m=%d m_in=%d", scheme, points.counts, points.m, points.m_in)
    return points


def points_frame(points):
    """Point set as a table with columns index, xi_1..xi_d, interior"""
    frame = pd.DataFrame(points.points, columns=[f"xi_{a + 1}" for a in range(points.dim)])
    frame.insert(0, "index", np.arange(points.m))
    interior = np.zeros(points.m, dtype=int)
    interior[points.interior] = 1
    frame["interior"] = interior
    return frame


def write_points_csv(points, path, echo=None):
    return write_table(points_frame(points), path, echo)
