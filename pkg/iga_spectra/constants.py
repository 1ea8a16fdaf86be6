"""
Numerical constants, tolerances and defaults for the IGA-L spectral experiments
All parametric quantities live on the unit cube [0,1]^d
"""

import numpy as np

# Superconvergent points on the reference interval [-1, 1], by degree
SC_REFERENCE_POINTS = {
    3: (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)),
    4: (-1.0, 0.0, 1.0),
    5: (-np.sqrt(225.0 - 30.0 * np.sqrt(3.0)) / 15.0,
        np.sqrt(225.0 - 30.0 * np.sqrt(3.0)) / 15.0),
    6: (-1.0, 0.0, 1.0),
    7: (-0.50491856751, 0.50491856751),
}
SC_MIN_DEGREE = 3
SC_MAX_DEGREE = 7

# Conic weight of the middle control point of a quarter-circle Bezier arc
QUARTER_ARC_WEIGHT = np.sqrt(2.0) / 2.0

# Geometry defaults (physical length units)
ANNULUS_INNER_RADIUS = 1.0
ANNULUS_OUTER_RADIUS = 2.0
SPHERE_MID_RADIUS = 10.0
SPHERE_THICKNESS = 0.04

DOMAINS = ("interval", "quarter_annulus", "unit_cube", "hollow_sphere_eighth")
DOMAIN_DIMENSION = {
    "interval": 1,
    "quarter_annulus": 2,
    "unit_cube": 3,
    "hollow_sphere_eighth": 3,
}
SCHEMES = ("greville", "sc", "cg")
TARGETS = ("A", "M")

# Tolerances
BOUNDARY_TOL = 1e-14          # point is on the parametric boundary
SC_DEDUPE_TOL = 1e-12         # merge SC points shared by adjacent spans
SINGULAR_MAP_TOL = 1e-12      # |det J| below this is a degenerate map
RANK_TOL = 1e-14              # sigma_min / sigma_max below this is rank deficient

# Singular-value estimation
DENSE_THRESHOLD = 2000        # columns; at or below this a full dense SVD is used
POWER_TOL = 1e-10             # relative change of the Rayleigh quotient
MAX_ITERATIONS = 10_000
DEFAULT_SEED = 1234

# Sweep output schema (header is fixed)
SWEEP_COLUMNS = (
    "domain", "d", "p", "h", "k", "scheme", "factor", "target", "dof", "m", "m_in",
    "sigma_max", "sigma_min", "cond", "nnz_A", "nnz_AtA", "method", "status", "seconds",
)

THREADS_ENV_VAR = "IGA_SPECTRA_THREADS"
