import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from iga_spectra.assembly import assemble
from iga_spectra.collocation_points import build_collocation_set
from iga_spectra.errors import DomainError, NonConvergenceError, RankDeficiencyError
from iga_spectra.geometry import make_patch
from iga_spectra.spectra import DENSE_SVD, ITERATIVE, ITERATIVE_SVDS, singular_extremes, spectral_sweep_entry
from iga_spectra.spline_core import make_space


def well_separated(rows, cols, rng, noise=0.01):
    """Tall sparse matrix whose extreme singular values are isolated from the rest"""
    d = np.linspace(1.0, 3.0, cols)
    d[0], d[-1] = 0.5, 4.0
    dense = np.zeros((rows, cols))
    dense[:cols, :cols] = np.diag(d)
    mask = rng.random((rows, cols)) < 0.05
    dense += noise * rng.standard_normal((rows, cols)) * mask
    return sp.csr_matrix(dense)


def relative(a, b):
    return abs(a - b) / abs(b)


def test_identity():
    report = singular_extremes(sp.identity(3, format="csr"))
    assert np.allclose([report.sigma_max, report.sigma_min, report.cond], 1.0, atol=1e-14)
    assert report.method == DENSE_SVD
    assert report.shape == (3, 3)


def test_diagonal():
    report = singular_extremes(sp.diags([3.0, 1.0]))
    assert abs(report.sigma_max - 3.0) < 1e-14
    assert abs(report.sigma_min - 1.0) < 1e-14
    assert abs(report.cond - 3.0) < 1e-14


def test_iterative_matches_dense():
    rng = np.random.default_rng(7)
    A = well_separated(200, 120, rng)
    s = scipy.linalg.svdvals(A.toarray())
    report = singular_extremes(A, dense_threshold=0)
    assert report.method == ITERATIVE
    assert report.iterations > 0
    assert relative(report.sigma_max, s[0]) < 1e-8
    assert relative(report.sigma_min, s[-1]) < 1e-8
    assert report.residual_max < 1e-3
    assert report.residual_min < 1e-3


def test_iterative_path_is_seeded():
    A = well_separated(90, 60, np.random.default_rng(3))
    first = singular_extremes(A, dense_threshold=0, seed=11)
    again = singular_extremes(A, dense_threshold=0, seed=11)
    assert first == again


def random_sparse(rows, cols, rng, density=0.1):
    return sp.random(rows, cols, density=density, format="csr", random_state=rng)


def test_small_oracle_corpus():
    rng = np.random.default_rng(2024)
    for _ in range(5):
        cols = int(rng.integers(20, 80))
        A = random_sparse(cols + int(rng.integers(50, 120)), cols, rng, density=0.2)
        s = scipy.linalg.svdvals(A.toarray())
        for threshold in (0, 2000):
            report = singular_extremes(A, dense_threshold=threshold)
            assert relative(report.sigma_max, s[0]) < 1e-6
            assert relative(report.sigma_min, s[-1]) < 1e-6


def test_scaling_and_permutation_invariance():
    rng = np.random.default_rng(5)
    A = well_separated(50, 30, rng, noise=0.2)
    base = singular_extremes(A)

    scaled = singular_extremes(7.0 * A)
    assert relative(scaled.sigma_max, 7.0 * base.sigma_max) < 1e-12
    assert relative(scaled.sigma_min, 7.0 * base.sigma_min) < 1e-12

    permuted = A[rng.permutation(50)][:, rng.permutation(30)]
    assert relative(singular_extremes(permuted).cond, base.cond) < 1e-10


def test_largest_singular_value_bounds_column_norms():
    A = well_separated(40, 25, np.random.default_rng(9), noise=0.5)
    report = singular_extremes(A)
    column_norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=0))).ravel()
    assert report.sigma_max >= column_norms.max() * (1.0 - 1e-12)


def test_wide_matrix_uses_transpose():
    A = np.random.default_rng(1).standard_normal((3, 5))
    report = singular_extremes(A)
    s = scipy.linalg.svdvals(A)
    assert report.shape == (3, 5)
    assert relative(report.sigma_max, s[0]) < 1e-12
    assert relative(report.sigma_min, s[-1]) < 1e-12


def test_rank_deficiency():
    A = np.random.default_rng(4).standard_normal((6, 3))
    A[:, 2] = A[:, 1]
    with pytest.raises(RankDeficiencyError):
        singular_extremes(A)


def test_empty_matrix():
    with pytest.raises(DomainError):
        singular_extremes(sp.csr_matrix((0, 3)))


def test_non_convergence_keeps_best_estimate():
    A = well_separated(60, 40, np.random.default_rng(8))
    with pytest.raises(NonConvergenceError) as info:
        singular_extremes(A, dense_threshold=0, max_iterations=1)
    assert info.value.best_estimate > 0.0


def test_spectral_sweep_entry():
    space = make_space(2, 10, 1)
    points = build_collocation_set("greville", space, 4.0)
    system = assemble(space, make_patch("interval"), points)

    report = spectral_sweep_entry(system, "A")
    assert report.cond > 1.0
    assert np.isfinite(report.cond)
    assert report.meta["target"] == "A"
    assert report.meta["dof"] == 10
    assert report.nnz == system.A.nnz

    mass = spectral_sweep_entry(system, "mass")
    assert mass.meta["target"] == "M"
    assert 0.0 < mass.sigma_min < mass.sigma_max

    with pytest.raises(DomainError):
        spectral_sweep_entry(system, "K")


def test_svds_fallback_when_factorization_fails(monkeypatch):
    def failing_splu(matrix):
        raise RuntimeError("Factor is exactly singular")

    monkeypatch.setattr("iga_spectra.spectra.splu", failing_splu)
    A = random_sparse(200, 120, np.random.default_rng(11))
    s = scipy.linalg.svdvals(A.toarray())
    report = singular_extremes(A, dense_threshold=0)
    assert report.method == ITERATIVE_SVDS
    assert relative(report.sigma_min, s[-1]) < 1e-6
    assert relative(report.sigma_max, s[0]) < 1e-6


def test_square_c1_greville_system_is_regular():
    space = make_space(8, 20, 1)
    system = assemble(space, make_patch("interval"), build_collocation_set("greville", space, 1.0))
    assert system.shape == (140, 140)
    square = spectral_sweep_entry(system, "A")
    oversampled = assemble(space, make_patch("interval"), build_collocation_set("greville", space, 4.0))
    over = spectral_sweep_entry(oversampled, "A")
    assert np.isfinite(square.cond)
    assert over.cond < square.cond


def test_spectral_sweep_entry_in_3d():
    for domain in ("unit_cube", "hollow_sphere_eighth"):
        space = make_space(3, 2, 2, d=3)
        system = assemble(space, make_patch(domain), build_collocation_set("greville", space, 4.0))
        for target in ("A", "M"):
            report = spectral_sweep_entry(system, target)
            assert report.method == DENSE_SVD
            assert 0.0 < report.sigma_min < report.sigma_max
            assert report.meta["domain"] == domain
            assert report.meta["d"] == 3
