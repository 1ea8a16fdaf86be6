"""
Open knot vectors, B-spline and NURBS basis evaluation with derivatives
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionMismatchError, DomainError, NumericalError


@dataclass(frozen=True, eq=False)
class KnotVector:
    """
    Open uniform knot vector with prescribed regularity

    Parameters:
    degree: polynomial degree p >= 1
    n: number of knot spans (mesh size h = 1/n)
    regularity: global continuity C^k, 0 <= k <= p-1
    knots: nondecreasing knot values in [0, 1]
    """
    degree: int
    n: int
    regularity: int
    knots: np.ndarray

    @property
    def num_basis(self):
        return (self.n - 1) * (self.degree - self.regularity) + self.degree + 1

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def breaks(self):
        """Distinct knot values xi_0 = 0 < ... < xi_n = 1"""
        return np.arange(self.n + 1) / self.n


@dataclass(frozen=True, eq=False)
class NurbsSpace:
    """Tensor-product NURBS space; weights are stored per tensor index"""
    knot_vectors: tuple
    weights: np.ndarray

    @property
    def dim(self):
        return len(self.knot_vectors)

    @property
    def shape(self):
        return tuple(kv.num_basis for kv in self.knot_vectors)

    @property
    def num_basis(self):
        return int(np.prod(self.shape))

    @property
    def degrees(self):
        return tuple(kv.degree for kv in self.knot_vectors)

    @property
    def rational(self):
        return not np.all(self.weights == 1.0)


@dataclass(frozen=True, eq=False)
class BasisEval:
    """
    Active basis functions at one parametric point

    indices are flat (C-order) tensor indices, sorted increasingly.
    grad has shape (n_active, d) and hess (n_active, d, d); both are None
    when not requested.
    """
    indices: np.ndarray
    values: np.ndarray
    grad: np.ndarray = None
    hess: np.ndarray = None


def build_knot_vector(p, n, k):
    """
    Build the open uniform knot vector of degree p on n spans with C^k regularity

    Parameters:
    p: degree, p >= 1
    n: number of spans, n >= 1
    k: regularity, 0 <= k <= p-1

    Returns:
    KnotVector with N_b + p + 1 knots
    """
    if p < 1:
        raise DomainError(f"degree must be >= 1, got p={p}")
    if n < 1:
        raise DomainError(f"number of spans must be >= 1, got n={n}")
    if k < 0 or k > p - 1:
        raise DomainError(f"regularity must satisfy 0 <= k <= p-1, got k={k} for p={p}")

    interior = np.repeat(np.arange(1, n) / n, p - k)
    knots = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(degree=p, n=n, regularity=k, knots=knots)


def find_span(kv, x, side="left"):
    """
    Index of the knot span containing x

    Ties at an interior knot resolve to the span on `side`. x = 0 always
    maps to the first span and x = 1 to the last one (left limit).
    """
    p = kv.degree
    last = len(kv.knots) - p - 2
    span = int(np.searchsorted(kv.knots, x, side=side)) - 1
    return min(max(span, p), last)


def _ders_basis_funs(span, x, p, knots, nd):
    """Non-zero basis functions and their derivatives up to order nd (NURBS Book A2.3)"""
    ders = np.zeros((nd + 1, p + 1))
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    ders[0] = ndu[:, p]

    # derivatives above the degree vanish identically
    top = min(nd, p)
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, top + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1

    factor = p
    for k in range(1, top + 1):
        ders[k] *= factor
        factor *= p - k
    return ders


def univariate_ders(kv, x, max_deriv=0, side="left"):
    """
    Raw univariate evaluation used by the tensor composition

    Returns:
    (first active index, array of shape (max_deriv+1, p+1))
    """
    if max_deriv not in (0, 1, 2):
        raise DomainError(f"max_deriv must be 0, 1 or 2, got {max_deriv}")
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"parametric coordinate {x} outside [0, 1]")
    span = find_span(kv, x, side)
    ders = _ders_basis_funs(span, x, kv.degree, kv.knots, max_deriv)
    return span - kv.degree, ders


def eval_bspline(kv, x, max_deriv=0, side="left"):
    """
    Evaluate the active univariate B-splines B_i^p at x

    Parameters:
    kv: KnotVector
    x: parametric coordinate in [0, 1]
    max_deriv: highest derivative order requested (0, 1 or 2)
    side: tie convention at interior knots ('left' or 'right')

    Returns:
    BasisEval with d = 1
    """
    first, ders = univariate_ders(kv, x, max_deriv, side)
    p = kv.degree
    grad = ders[1][:, None] if max_deriv >= 1 else None
    hess = ders[2][:, None, None] if max_deriv >= 2 else None
    return BasisEval(
        indices=np.arange(first, first + p + 1),
        values=ders[0],
        grad=grad,
        hess=hess,
    )


def _outer(factors):
    return reduce(np.multiply.outer, factors).ravel()


def tensor_basis(space, univariate, max_deriv=0):
    """
    Compose per-direction evaluations into the multivariate (rational) basis

    Parameters:
    space: NurbsSpace
    univariate: one (first index, ders) pair per direction, as returned by univariate_ders
    max_deriv: highest derivative order requested

    Returns:
    BasisEval
    """
    d = space.dim
    if len(univariate) != d:
        raise DimensionMismatchError(f"expected {d} directions, got {len(univariate)}")

    index_ranges = [first + np.arange(ders.shape[1]) for first, ders in univariate]
    grids = np.meshgrid(*index_ranges, indexing="ij")
    indices = np.ravel_multi_index(tuple(g.ravel() for g in grids), space.shape)
    tables = [ders for _, ders in univariate]

    values = _outer([t[0] for t in tables])
    grad = hess = None
    if max_deriv >= 1:
        grad = np.stack(
            [_outer([t[1] if c == a else t[0] for c, t in enumerate(tables)]) for a in range(d)],
            axis=1,
        )
    if max_deriv >= 2:
        hess = np.empty((len(values), d, d))
        for a in range(d):
            for b in range(a, d):
                orders = [(c == a) + (c == b) for c in range(d)]
                hess[:, a, b] = _outer([t[o] for t, o in zip(tables, orders)])
                hess[:, b, a] = hess[:, a, b]

    if not space.rational:
        return BasisEval(indices=indices, values=values, grad=grad, hess=hess)
    return _rationalize(space.weights.ravel()[indices], indices, values, grad, hess)


def _rationalize(w, indices, values, grad, hess):
    """Quotient rule on the weighted B-spline sums"""
    wb = w * values
    W = wb.sum()
    if not W > 0.0:
        raise NumericalError(f"NURBS weight denominator is {W}; weights are corrupted")
    N = wb / W
    dN = d2N = None
    if grad is not None:
        wdB = w[:, None] * grad
        dW = wdB.sum(axis=0)
        dN = (wdB - N[:, None] * dW[None, :]) / W
    if hess is not None:
        wd2B = w[:, None, None] * hess
        d2W = wd2B.sum(axis=0)
        d2N = (wd2B
               - dN[:, :, None] * dW[None, None, :]
               - dW[None, :, None] * dN[:, None, :]
               - N[:, None, None] * d2W[None, :, :]) / W
    return BasisEval(indices=indices, values=N, grad=dN, hess=d2N)


def eval_nurbs(space, xi, max_deriv=0):
    """
    Evaluate the tensor NURBS basis and its parametric derivatives at xi

    When every weight equals 1 the result is the tensor B-spline basis itself.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (space.dim,):
        raise DimensionMismatchError(f"point of shape {xi.shape} for a {space.dim}-variate space")
    univariate = [univariate_ders(kv, x, max_deriv) for kv, x in zip(space.knot_vectors, xi)]
    return tensor_basis(space, univariate, max_deriv)


def make_space(p, n, k, d=1):
    """Polynomial (unit-weight) solution space with the same knot vector in every direction"""
    kv = build_knot_vector(p, n, k)
    knot_vectors = (kv,) * d
    return NurbsSpace(knot_vectors=knot_vectors, weights=np.ones((kv.num_basis,) * d))


def greville_abscissae(kv):
    """
    Greville abscissae xi_i = (eta_{i+1} + ... + eta_{i+p}) / p

    Returns:
    numpy array of length N_b, starting at 0 and ending at 1
    """
    p = kv.degree
    windows = np.lib.stride_tricks.sliding_window_view(kv.knots[1:-1], p)
    return windows.sum(axis=1) / p
