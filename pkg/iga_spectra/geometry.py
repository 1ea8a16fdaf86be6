"""
Benchmark geometric maps G: [0,1]^d -> Omega as fixed NURBS patches
"""

from dataclasses import dataclass, field

import numpy as np

from .constants import (
    ANNULUS_INNER_RADIUS,
    ANNULUS_OUTER_RADIUS,
    DOMAINS,
    QUARTER_ARC_WEIGHT,
    SINGULAR_MAP_TOL,
    SPHERE_MID_RADIUS,
    SPHERE_THICKNESS,
)
from .errors import DimensionMismatchError, DomainError, SingularMapError
from .spline_core import NurbsSpace, build_knot_vector, eval_nurbs


@dataclass(frozen=True, eq=False)
class GeometryPatch:
    tag: str
    space: NurbsSpace
    control_points: np.ndarray     # shape space.shape + (dim,)
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.space.dim


@dataclass(frozen=True, eq=False)
class MapJet:
    """
    Position, Jacobian and coordinate Hessians of G at one parametric point

    jacobian[c, a] = dx_c / dxi_a and hessian[c, a, b] = d2x_c / dxi_a dxi_b
    """
    x: np.ndarray
    jacobian: np.ndarray
    hessian: np.ndarray

    @property
    def det(self):
        return float(np.linalg.det(self.jacobian))


# Quarter circle as a single rational quadratic Bezier segment
_ARC_WEIGHTS = np.array([1.0, QUARTER_ARC_WEIGHT, 1.0])


def _line_space():
    kv = build_knot_vector(1, 1, 0)
    return kv, np.ones(kv.num_basis)


def _arc_space():
    kv = build_knot_vector(2, 1, 1)
    return kv, _ARC_WEIGHTS


def _tensor_weights(per_direction):
    w = per_direction[0]
    for wd in per_direction[1:]:
        w = np.multiply.outer(w, wd)
    return w


def _interval():
    kv, w = _line_space()
    space = NurbsSpace(knot_vectors=(kv,), weights=w)
    return space, np.array([[0.0], [1.0]])


def _unit_cube():
    kv, w = _line_space()
    space = NurbsSpace(knot_vectors=(kv,) * 3, weights=_tensor_weights([w] * 3))
    corners = np.stack(np.meshgrid([0.0, 1.0], [0.0, 1.0], [0.0, 1.0], indexing="ij"), axis=-1)
    return space, corners


def _quarter_annulus(inner, outer):
    # direction 0 radial (linear), direction 1 angular (arc); det J > 0
    line, wl = _line_space()
    arc, wa = _arc_space()
    space = NurbsSpace(knot_vectors=(line, arc), weights=_tensor_weights([wl, wa]))
    arc_points = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    radii = np.array([inner, outer])
    control = radii[:, None, None] * arc_points[None, :, :]
    return space, control


def _hollow_sphere_eighth(mid_radius, thickness):
    # directions: thickness (linear), polar angle from the pole, azimuth
    line, wl = _line_space()
    polar, wp = _arc_space()
    azimuth, wz = _arc_space()
    space = NurbsSpace(
        knot_vectors=(line, polar, azimuth),
        weights=_tensor_weights([wl, wp, wz]),
    )
    polar_points = np.array([[0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])      # (rho, z)
    azimuth_points = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])    # (cos, sin)
    radii = np.array([mid_radius - thickness / 2.0, mid_radius + thickness / 2.0])

    control = np.empty((2, 3, 3, 3))
    for i, r in enumerate(radii):
        for j, (rho, z) in enumerate(polar_points):
            for l, (c, s) in enumerate(azimuth_points):
                control[i, j, l] = r * np.array([rho * c, rho * s, z])
    return space, control


def make_patch(tag, params=None):
    """
    Build one of the four benchmark patches

    Parameters:
    tag: 'interval', 'quarter_annulus', 'unit_cube' or 'hollow_sphere_eighth'
    params: optional dict with inner_radius/outer_radius (annulus) or
            mid_radius/thickness (hollow sphere)

    Returns:
    GeometryPatch
    """
    params = dict(params or {})
    if tag == "interval":
        space, control = _interval()
        used = {}
    elif tag == "unit_cube":
        space, control = _unit_cube()
        used = {}
    elif tag == "quarter_annulus":
        inner = float(params.get("inner_radius", ANNULUS_INNER_RADIUS))
        outer = float(params.get("outer_radius", ANNULUS_OUTER_RADIUS))
        if inner <= 0.0 or outer <= 0.0:
            raise DomainError(f"annulus radii must be positive, got {inner}, {outer}")
        if inner >= outer:
            raise DomainError(f"inner radius {inner} must be below outer radius {outer}")
        space, control = _quarter_annulus(inner, outer)
        used = {"inner_radius": inner, "outer_radius": outer}
    elif tag == "hollow_sphere_eighth":
        mid = float(params.get("mid_radius", SPHERE_MID_RADIUS))
        thickness = float(params.get("thickness", SPHERE_THICKNESS))
        if mid <= 0.0 or thickness <= 0.0:
            raise DomainError(f"sphere radius and thickness must be positive, got {mid}, {thickness}")
        if thickness >= 2.0 * mid:
            raise DomainError(f"thickness {thickness} must be below twice the mid radius {mid}")
        space, control = _hollow_sphere_eighth(mid, thickness)
        used = {
            "mid_radius": mid,
            "thickness": thickness,
            "inner_radius": mid - thickness / 2.0,
            "outer_radius": mid + thickness / 2.0,
        }
    else:
        raise DomainError(f"unknown domain '{tag}', expected one of {DOMAINS}")

    return GeometryPatch(tag=tag, space=space, control_points=control, params=used)


def map_point(patch, xi):
    """x = G(xi) without derivatives; valid on degenerate edges such as the sphere pole"""
    basis = eval_nurbs(patch.space, xi)
    P = patch.control_points.reshape(-1, patch.dim)[basis.indices]
    return basis.values @ P


def eval_map(patch, xi):
    """
    Evaluate x = G(xi), its Jacobian and coordinate Hessians

    Raises SingularMapError when |det J| < 1e-12.
    """
    d = patch.dim
    basis = eval_nurbs(patch.space, xi, max_deriv=2)
    P = patch.control_points.reshape(-1, d)[basis.indices]
    jet = MapJet(
        x=basis.values @ P,
        jacobian=P.T @ basis.grad,
        hessian=np.einsum("ic,iab->cab", P, basis.hess),
    )
    if abs(jet.det) < SINGULAR_MAP_TOL:
        raise SingularMapError(f"degenerate map at xi={np.asarray(xi).tolist()}, det J={jet.det:.3e}")
    return jet


def physical_laplacian(jet, grad_xi, hess_xi):
    """
    Physical Laplacian of u = N o G^{-1} from parametric derivatives of N

    Parameters:
    jet: MapJet at the evaluation point
    grad_xi: parametric gradient, shape (d,) or (n, d) for n functions at once
    hess_xi: parametric Hessian, shape (d, d) or (n, d, d)

    Returns:
    float, or array of length n
    """
    grad_xi = np.asarray(grad_xi, dtype=float)
    hess_xi = np.asarray(hess_xi, dtype=float)
    single = grad_xi.ndim == 1
    grad_xi = np.atleast_2d(grad_xi)
    if grad_xi.shape[1] != jet.jacobian.shape[0]:
        raise DimensionMismatchError(f"gradient of size {grad_xi.shape[1]} for a {jet.jacobian.shape[0]}-d map")
    hess_xi = hess_xi.reshape(grad_xi.shape[0], *jet.jacobian.shape)

    try:
        J_inv = np.linalg.inv(jet.jacobian)
    except np.linalg.LinAlgError as exc:
        raise SingularMapError(str(exc)) from exc
    # grad_x = J^{-T} grad_xi, row-wise
    grad_x = grad_xi @ J_inv
    corrected = hess_xi - np.einsum("nc,cab->nab", grad_x, jet.hessian)
    # trace(J^{-T} B J^{-1}) = sum_ab B_ab (J^{-1} J^{-T})_ab
    metric = J_inv @ J_inv.T
    lap = np.einsum("nab,ab->n", corrected, metric)
    return float(lap[0]) if single else lap
