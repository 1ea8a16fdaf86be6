"""
Extreme singular values and spectral condition numbers of sparse rectangular matrices
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu, svds

from .constants import DEFAULT_SEED, DENSE_THRESHOLD, MAX_ITERATIONS, POWER_TOL, RANK_TOL
from .errors import DomainError, FactorizationError, NonConvergenceError, RankDeficiencyError

logger = logging.getLogger(__name__)

DENSE_SVD = "dense_svd"
ITERATIVE = "iterative"
ITERATIVE_SVDS = "iterative_svds"

TARGET_ALIASES = {"A": "A", "collocation": "A", "M": "M", "mass": "M"}


@dataclass(frozen=True)
class SpectralReport:
    """
    Extreme singular values of one matrix

    residual_max/residual_min are the certificates |A^T A v - s^2 v| / s^2 of
    the iterative path (0 for the dense path).
    """
    sigma_max: float
    sigma_min: float
    cond: float
    method: str
    iterations: int
    residual_max: float
    residual_min: float
    shape: tuple
    nnz: int
    meta: dict = field(default_factory=dict)


def _rayleigh_iteration(apply, n, tol, max_iterations, rng, label):
    """
    Power iteration with the operator `apply`; stops on relative change of the Rayleigh quotient

    Returns:
    (Rayleigh quotient, unit vector, iterations)
    """
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    previous = 0.0
    for iteration in range(1, max_iterations + 1):
        w = apply(v)
        current = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0, v, iteration
        v = w / norm_w
        if abs(current - previous) <= tol * abs(current):
            return current, v, iteration
        previous = current
    raise NonConvergenceError(
        f"{label} did not converge in {max_iterations} iterations",
        best_estimate=previous,
    )


def _certificate(N, v, lam):
    v = v / np.linalg.norm(v)
    return float(np.linalg.norm(N @ v - lam * v) / lam) if lam > 0.0 else np.inf


def _dense_extremes(A):
    s = scipy.linalg.svdvals(A.toarray() if sp.issparse(A) else np.asarray(A))
    return float(s[0]), float(s[-1])


def _smallest_by_svds(A, N, seed):
    try:
        _, s, vt = svds(A, k=1, which="SM", solver="arpack", random_state=seed)
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        raise FactorizationError(f"smallest singular value estimation failed: {exc}") from exc
    sigma = float(s[0])
    return sigma, _certificate(N, vt[0], sigma ** 2)


def singular_extremes(A, dense_threshold=DENSE_THRESHOLD, tol=POWER_TOL,
                      max_iterations=MAX_ITERATIONS, seed=DEFAULT_SEED):
    """
    Largest and smallest singular values of A and their ratio

    Matrices with more columns than rows are analyzed through their transpose,
    so the extremes are taken over the min(rows, cols) singular values.

    Parameters:
    A: sparse or dense matrix
    dense_threshold: at or below this column count a full dense SVD is used
    tol: relative Rayleigh-quotient change that stops the iterations
    max_iterations: iteration limit of each iterative estimate
    seed: start-vector seed

    Returns:
    SpectralReport
    """
    A = sp.csr_matrix(A)
    shape, nnz = A.shape, A.nnz
    if min(shape) == 0:
        raise DomainError(f"cannot analyze an empty matrix of shape {shape}")
    if shape[0] < shape[1]:
        logger.debug("wide matrix %s analyzed through its transpose", shape)
        A = A.T.tocsr()

    if A.shape[1] <= dense_threshold:
        sigma_max, sigma_min = _dense_extremes(A)
        method, iterations, residual_max, residual_min = DENSE_SVD, 0, 0.0, 0.0
    else:
        rng = np.random.default_rng(seed)
        N = (A.T @ A).tocsc()
        n = N.shape[0]

        try:
            _, v, it_max = _rayleigh_iteration(lambda x: N @ x, n, tol, max_iterations, rng, "power iteration")
        except NonConvergenceError as exc:
            raise NonConvergenceError(
                str(exc), best_estimate=np.sqrt(abs(exc.best_estimate)), residual=np.nan
            ) from exc
        lam_max = float(v @ (N @ v))
        residual_max = _certificate(N, v, lam_max)
        sigma_max = np.sqrt(max(lam_max, 0.0))

        try:
            lu = splu(N)
        except RuntimeError as exc:
            logger.warning("factorization of A^T A failed (%s); falling back to svds", exc)
            sigma_min, residual_min = _smallest_by_svds(A, N, seed)
            method, iterations = ITERATIVE_SVDS, it_max
        else:
            try:
                _, v, it_min = _rayleigh_iteration(lu.solve, n, tol, max_iterations, rng, "inverse iteration")
            except NonConvergenceError as exc:
                best = 1.0 / exc.best_estimate if exc.best_estimate else np.nan
                raise NonConvergenceError(str(exc), best_estimate=np.sqrt(abs(best)), residual=np.nan) from exc
            lam_min = float(v @ (N @ v))
            residual_min = _certificate(N, v, lam_min)
            sigma_min = np.sqrt(max(lam_min, 0.0))
            method, iterations = ITERATIVE, it_max + it_min
        logger.debug(
            "iterative extremes: sigma_max=%.6e (res %.1e) sigma_min=%.6e (res %.1e) after %d iterations",
            sigma_max, residual_max, sigma_min, residual_min, iterations,
        )

    if not sigma_max > 0.0 or sigma_min < RANK_TOL * sigma_max:
        raise RankDeficiencyError(
            f"sigma_min={sigma_min:.3e} below {RANK_TOL:g} * sigma_max={sigma_max:.3e} for a {shape} matrix"
        )

    return SpectralReport(
        sigma_max=float(sigma_max),
        sigma_min=float(sigma_min),
        cond=float(sigma_max) / float(sigma_min),
        method=method,
        iterations=int(iterations),
        residual_max=float(residual_max),
        residual_min=float(residual_min),
        shape=tuple(shape),
        nnz=int(nnz),
    )


def spectral_sweep_entry(system, target="A", **options):
    """
    Spectral report of the collocation (A) or mass (M) matrix of an assembled system

    options are passed to singular_extremes.
    """
    if target not in TARGET_ALIASES:
        raise DomainError(f"unknown target '{target}', expected one of {sorted(TARGET_ALIASES)}")
    target = TARGET_ALIASES[target]
    matrix = system.A if target == "A" else system.M
    report = singular_extremes(matrix, **options)
    logger.info(
        "%s on %s p=%d n=%d k=%d: cond=%.6e (%s)",
        target, system.meta.get("domain"), system.meta.get("p"), system.meta.get("n"),
        system.meta.get("k"), report.cond, report.method,
    )
    return replace(report, meta=dict(system.meta, target=target))
