import numpy as np
import pytest

from iga_spectra.constants import QUARTER_ARC_WEIGHT
from iga_spectra.errors import DomainError, NumericalError
from iga_spectra.spline_core import (
    NurbsSpace,
    build_knot_vector,
    eval_bspline,
    eval_nurbs,
    find_span,
    greville_abscissae,
    make_space,
    univariate_ders,
)


def full_vector(kv, x, order, side="left"):
    """All N_b basis values (or derivatives) at x, zeros outside the active set"""
    first, ders = univariate_ders(kv, x, max_deriv=order, side=side)
    out = np.zeros(kv.num_basis)
    out[first:first + kv.degree + 1] = ders[order]
    return out


def test_knot_vector_examples():
    kv = build_knot_vector(2, 2, 1)
    assert np.array_equal(kv.knots, [0, 0, 0, 0.5, 1, 1, 1])
    assert kv.num_basis == 4

    assert build_knot_vector(3, 10, 2).num_basis == 13

    kv = build_knot_vector(1, 1, 0)
    assert np.array_equal(kv.knots, [0, 0, 1, 1])
    assert kv.num_basis == 2


def test_knot_vector_invariants():
    for p in range(1, 8):
        for k in range(p):
            for n in (1, 3, 7):
                kv = build_knot_vector(p, n, k)
                assert len(kv.knots) == kv.num_basis + p + 1
                assert np.sum(kv.knots == 0.0) == p + 1
                assert np.sum(kv.knots == 1.0) == p + 1
                for i in range(1, n):
                    assert np.sum(np.isclose(kv.knots, i / n, atol=1e-15)) == p - k
                assert np.all(np.diff(kv.knots) >= 0.0)


def test_knot_vector_rejects_bad_input():
    with pytest.raises(DomainError):
        build_knot_vector(3, 4, 3)
    with pytest.raises(DomainError):
        build_knot_vector(3, 0, 1)
    with pytest.raises(DomainError):
        build_knot_vector(0, 4, 0)


def test_find_span_ties_and_endpoints():
    kv = build_knot_vector(2, 4, 1)
    assert find_span(kv, 0.0) == 2
    assert find_span(kv, 1.0) == len(kv.knots) - 2 - 2
    left, right = find_span(kv, 0.5, "left"), find_span(kv, 0.5, "right")
    assert kv.knots[left] < 0.5 == kv.knots[left + 1]
    assert kv.knots[right] == 0.5 < kv.knots[right + 1]


def test_hat_functions():
    kv = build_knot_vector(1, 2, 0)
    basis = eval_bspline(kv, 0.25)
    assert np.array_equal(basis.indices, [0, 1])
    assert np.allclose(basis.values, [0.5, 0.5], atol=1e-15)


def test_right_endpoint_uses_left_limit():
    kv = build_knot_vector(3, 5, 2)
    basis = eval_bspline(kv, 1.0)
    assert basis.indices[-1] == kv.num_basis - 1
    assert abs(basis.values[-1] - 1.0) < 1e-14
    assert np.all(basis.values[:-1] == 0.0)


def test_partition_of_unity_and_nonnegativity():
    rng = np.random.default_rng(0)
    xs = rng.random(1000)
    for p in range(2, 11):
        for k in {1, p - 1}:
            kv = build_knot_vector(p, 7, k)
            for x in xs:
                values = eval_bspline(kv, x).values
                assert len(values) == p + 1
                assert abs(values.sum() - 1.0) < 1e-12
                assert values.min() >= -1e-14


def test_derivatives_match_finite_differences():
    kv = build_knot_vector(4, 7, 3)
    x, step = 0.3, 1e-5
    first = full_vector(kv, x, 1)
    second = full_vector(kv, x, 2)
    fd_first = (full_vector(kv, x + step, 0) - full_vector(kv, x - step, 0)) / (2 * step)
    fd_second = (full_vector(kv, x + step, 1) - full_vector(kv, x - step, 1)) / (2 * step)
    assert np.allclose(first, fd_first, rtol=1e-6, atol=1e-6 * np.abs(first).max())
    assert np.allclose(second, fd_second, rtol=1e-6, atol=1e-6 * np.abs(second).max())


def test_derivatives_sum_to_zero():
    for p in (2, 3, 5, 8):
        kv = build_knot_vector(p, 6, 1)
        for x in (0.13, 0.41, 0.77):
            basis = eval_bspline(kv, x, max_deriv=2)
            assert abs(basis.grad.sum()) < 1e-10
            assert abs(basis.hess.sum()) < 1e-8


def test_derivatives_above_degree_vanish():
    kv = build_knot_vector(1, 4, 0)
    basis = eval_bspline(kv, 0.3, max_deriv=2)
    assert np.all(basis.hess == 0.0)


def test_regularity_across_breaks():
    # maximal smoothness: first derivative continuous
    kv = build_knot_vector(3, 4, 2)
    jump = full_vector(kv, 0.5, 1, "left") - full_vector(kv, 0.5, 1, "right")
    assert np.abs(jump).max() < 1e-10

    # C^1: first derivative continuous, second derivative jumps
    kv = build_knot_vector(3, 4, 1)
    jump1 = full_vector(kv, 0.5, 1, "left") - full_vector(kv, 0.5, 1, "right")
    jump2 = full_vector(kv, 0.5, 2, "left") - full_vector(kv, 0.5, 2, "right")
    assert np.abs(jump1).max() < 1e-10
    assert np.abs(jump2).max() > 1e-3


def test_eval_rejects_out_of_range():
    kv = build_knot_vector(2, 3, 1)
    with pytest.raises(DomainError):
        eval_bspline(kv, 1.5)
    with pytest.raises(DomainError):
        eval_bspline(kv, -0.1)
    with pytest.raises(DomainError):
        eval_bspline(kv, 0.5, max_deriv=3)


def test_unit_weights_reduce_to_tensor_bsplines():
    space = make_space(3, 4, 2, d=2)
    kv = space.knot_vectors[0]
    xi = np.array([0.37, 0.81])
    rational = eval_nurbs(space, xi, max_deriv=2)
    b0, b1 = eval_bspline(kv, xi[0], 2), eval_bspline(kv, xi[1], 2)
    assert np.array_equal(rational.values, np.outer(b0.values, b1.values).ravel())
    assert np.allclose(rational.grad[:, 0], np.outer(b0.grad[:, 0], b1.values).ravel(), atol=1e-14)
    assert np.allclose(rational.hess[:, 0, 1], np.outer(b0.grad[:, 0], b1.grad[:, 0]).ravel(), atol=1e-14)
    assert len(rational.indices) <= 4 ** 2


def test_tensor_indices_are_c_order():
    space = make_space(2, 3, 1, d=2)
    basis = eval_nurbs(space, [0.0, 0.0])
    assert basis.indices[0] == 0
    assert abs(basis.values[0] - 1.0) < 1e-14
    basis = eval_nurbs(space, [1.0, 1.0])
    assert basis.indices[-1] == space.num_basis - 1
    assert abs(basis.values[-1] - 1.0) < 1e-14


def arc_space():
    kv = build_knot_vector(2, 1, 1)
    return NurbsSpace(knot_vectors=(kv,), weights=np.array([1.0, QUARTER_ARC_WEIGHT, 1.0]))


def test_quarter_circle_is_exact():
    space = arc_space()
    control = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    for t in np.linspace(0.0, 1.0, 100):
        basis = eval_nurbs(space, [t])
        x, y = basis.values @ control[basis.indices]
        assert abs(x * x + y * y - 1.0) < 1e-12


def test_rational_partition_of_unity():
    line = build_knot_vector(1, 1, 0)
    arc = build_knot_vector(2, 1, 1)
    weights = np.multiply.outer(np.ones(2), np.array([1.0, QUARTER_ARC_WEIGHT, 1.0]))
    space = NurbsSpace(knot_vectors=(line, arc), weights=weights)
    assert space.rational
    rng = np.random.default_rng(1)
    for xi in rng.random((200, 2)):
        basis = eval_nurbs(space, xi, max_deriv=2)
        assert abs(basis.values.sum() - 1.0) < 1e-12
        assert np.abs(basis.grad.sum(axis=0)).max() < 1e-12
        assert np.abs(basis.hess.sum(axis=0)).max() < 1e-11
        assert basis.values.min() >= -1e-14


def test_rational_derivative_matches_finite_differences():
    space = arc_space()
    x, step = 0.4, 1e-5
    basis = eval_nurbs(space, [x], max_deriv=2)
    plus = eval_nurbs(space, [x + step], max_deriv=1)
    minus = eval_nurbs(space, [x - step], max_deriv=1)
    fd_first = (plus.values - minus.values) / (2 * step)
    fd_second = (plus.grad[:, 0] - minus.grad[:, 0]) / (2 * step)
    assert np.allclose(basis.grad[:, 0], fd_first, rtol=1e-6, atol=1e-8)
    assert np.allclose(basis.hess[:, 0, 0], fd_second, rtol=1e-6, atol=1e-6)


def test_corrupted_weights_are_reported():
    kv = build_knot_vector(2, 1, 1)
    space = NurbsSpace(knot_vectors=(kv,), weights=-np.ones(3))
    with pytest.raises(NumericalError):
        eval_nurbs(space, [0.5])


def test_greville_abscissae():
    assert np.allclose(greville_abscissae(build_knot_vector(2, 2, 1)), [0.0, 0.25, 0.75, 1.0], atol=1e-15)

    kv = build_knot_vector(2, 4, 1)
    g = greville_abscissae(kv)
    assert g[0] == 0.0 and g[-1] == 1.0
    assert np.abs(g + g[::-1] - 1.0).max() < 1e-15


def test_greville_linear_reproduction():
    for p, n, k in [(2, 5, 1), (3, 5, 1), (4, 6, 3), (7, 3, 2)]:
        kv = build_knot_vector(p, n, k)
        g = greville_abscissae(kv)
        for x in np.linspace(0.0, 1.0, 50):
            basis = eval_bspline(kv, x)
            assert abs(g[basis.indices] @ basis.values - x) < 1e-12
