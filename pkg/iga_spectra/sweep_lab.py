"""
Parameter sweeps over discretizations, scaling-law fits and closed-form reference laws
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
import pandas as pd

from .assembly import assemble, normal_product_pattern
from .collocation_points import build_collocation_set
from .constants import SWEEP_COLUMNS
from .errors import DomainError, IgaSpectraError, InsufficientDataError, UnknownLawError
from .geometry import make_patch
from .lsq_solver import get_case
from .plotting_utils import write_table
from .spectra import spectral_sweep_entry
from .spline_core import make_space

logger = logging.getLogger(__name__)

OK = "ok"
NAN = float("nan")

FIT_VARIABLES = ("h", "p", "m")
FIT_QUANTITIES = ("sigma_max", "sigma_min", "cond")
FIT_MODELS = ("power_in_h", "power_in_p", "power_in_m", "exp_in_p")

# ≲ in the regime splits is read literally as <=
REGIME_RULE = "h <= boundary"

# Sweep failures that become record status tags
RECORDED_FAILURES = (IgaSpectraError, ArithmeticError, np.linalg.LinAlgError, RuntimeError, MemoryError)


@dataclass(frozen=True)
class SweepRecord:
    domain: str
    d: int
    p: int
    h: float
    k: int
    scheme: str
    factor: float
    target: str
    dof: float = NAN
    m: float = NAN
    m_in: float = NAN
    sigma_max: float = NAN
    sigma_min: float = NAN
    cond: float = NAN
    nnz_A: float = NAN
    nnz_AtA: float = NAN
    method: str = ""
    status: str = OK
    seconds: float = NAN
    iterations: float = NAN
    residual_max: float = NAN
    residual_min: float = NAN


@dataclass(frozen=True)
class FitResult:
    """
    Least-squares fit of log y against log x (power models) or x (exponential models)

    excluded lists the x values dropped as pre-asymptotic.
    """
    model: str
    slope: float
    intercept: float
    r2: float
    n_used: int
    excluded: tuple = ()
    law: str = None
    regime_rule: str = REGIME_RULE


@dataclass(frozen=True, eq=False)
class GroupFit:
    label: str
    spec: object
    group: dict
    fit: FitResult
    x: np.ndarray
    y: np.ndarray
    law_values: np.ndarray = None


# -- sweeps -------------------------------------------------------------------

def run_configuration(config, point, strict=False):
    """
    Assemble and analyze one grid point, one record per target

    Failures become status tags (the exception class name) with NaN results
    unless strict is set, in which case they propagate.
    """
    base = dict(
        domain=config.domain, d=config.dim, p=point.p, h=1.0 / point.n, k=point.k,
        scheme=point.scheme, factor=point.factor,
    )
    start_time = time.perf_counter()
    try:
        patch = make_patch(config.domain, config.geometry)
        space = make_space(point.p, point.n, point.k, config.dim)
        points = build_collocation_set(point.scheme, space, point.factor)
        system = assemble(space, patch, points, source=get_case(config.source).source)
        nnz_AtA, _ = normal_product_pattern(system.A)
    except RECORDED_FAILURES as exc:
        if strict:
            raise
        logger.warning("grid point %s failed during assembly: %s", base, exc)
        return [SweepRecord(**base, target=t, status=type(exc).__name__,
                            seconds=time.perf_counter() - start_time) for t in config.targets]
    assembly_seconds = time.perf_counter() - start_time

    shared = dict(base, dof=system.dof, m=points.m, m_in=points.m_in, nnz_A=system.A.nnz, nnz_AtA=nnz_AtA)
    records = []
    for target in config.targets:
        target_start = time.perf_counter()
        try:
            report = spectral_sweep_entry(system, target, dense_threshold=config.dense_threshold, seed=config.seed)
        except RECORDED_FAILURES as exc:
            if strict:
                raise
            logger.warning("grid point %s target %s failed: %s", base, target, exc)
            records.append(SweepRecord(**shared, target=target, status=type(exc).__name__,
                                       seconds=assembly_seconds + time.perf_counter() - target_start))
            continue
        records.append(SweepRecord(
            **shared,
            target=target,
            sigma_max=report.sigma_max,
            sigma_min=report.sigma_min,
            cond=report.cond,
            method=report.method,
            seconds=assembly_seconds + time.perf_counter() - target_start,
            iterations=report.iterations,
            residual_max=report.residual_max,
            residual_min=report.residual_min,
        ))
    return records


def run_sweep(config, threads=None):
    """
    Run every grid point of a validated config

    Returns:
    list of SweepRecord in grid order, len(grid) * len(targets) entries
    """
    grid = config.grid()
    threads = threads or config.threads
    logger.info("sweep over %d grid points on %s with %d thread(s)", len(grid), config.domain, threads)
    start_time = time.perf_counter()

    def run(point):
        return run_configuration(config, point)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_point = list(pool.map(run, grid))
    else:
        per_point = [run(point) for point in grid]

    records = [record for chunk in per_point for record in chunk]
    failed = sum(r.status != OK for r in records)
    logger.info("sweep finished: %d records, %d failed, %.1f s", len(records), failed, time.perf_counter() - start_time)
    return records


def records_to_frame(records, columns=SWEEP_COLUMNS):
    frame = pd.DataFrame([asdict(r) for r in records], columns=[f.name for f in fields(SweepRecord)])
    return frame.loc[:, list(columns)]


def write_records_csv(records, path, echo=None, columns=SWEEP_COLUMNS):
    return write_table(records_to_frame(records, columns), path, echo)


# -- fits ---------------------------------------------------------------------

def default_model(x):
    return f"power_in_{x}"


def fit_series(x, y, model, excluded=(), law=None):
    """
    Fit a power law y = C x^a or an exponential law y = C e^(a x)

    Non-finite and nonpositive values are ignored.

    Returns:
    FitResult with slope a, intercept ln C and the coefficient of determination
    """
    if model not in FIT_MODELS:
        raise DomainError(f"unknown fit model '{model}', expected one of {FIT_MODELS}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    power = model.startswith("power_")
    usable = np.isfinite(x) & np.isfinite(y) & (y > 0.0)
    if power:
        usable &= x > 0.0
    x, y = x[usable], y[usable]
    if len(x) < 3 or np.unique(x).size < 2:
        raise InsufficientDataError(f"{model} fit needs at least 3 points with distinct x, got {len(x)}")

    X = np.log(x) if power else x
    Y = np.log(y)
    slope, intercept = np.polyfit(X, Y, 1)
    ss_res = float(np.sum((Y - (slope * X + intercept)) ** 2))
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return FitResult(
        model=model,
        slope=float(slope),
        intercept=float(intercept),
        r2=float(min(max(r2, 0.0), 1.0)),
        n_used=int(len(x)),
        excluded=tuple(excluded),
        law=law,
    )


# grid fields that may vary together with each fit variable
_COVARYING = {"h": ("h",), "p": ("p", "k"), "m": ("factor",)}
_GROUP_FIELDS = ("domain", "d", "p", "h", "k", "scheme", "factor", "target")


def _group_fields(x):
    return tuple(f for f in _GROUP_FIELDS if f not in _COVARYING[x])


def fit_scaling(records, x, y="cond", model=None, law=None):
    """
    Fit y against one discretization parameter

    Parameters:
    records: SweepRecords that differ only in x (and fields tied to it)
    x: 'h', 'p' or 'm'
    y: 'sigma_max', 'sigma_min' or 'cond'
    model: fit model, default power_in_<x>
    law: reference law name; for h-fits it drops records outside its asymptotic regime

    Returns:
    FitResult
    """
    if x not in FIT_VARIABLES:
        raise DomainError(f"x must be one of {FIT_VARIABLES}, got {x!r}")
    if y not in FIT_QUANTITIES:
        raise DomainError(f"y must be one of {FIT_QUANTITIES}, got {y!r}")
    model = model or default_model(x)
    if not model.endswith(f"_{x}"):
        raise DomainError(f"model {model} is not a model in {x}")

    records = [r for r in records if r.status == OK]
    for name in _group_fields(x):
        values = {getattr(r, name) for r in records}
        if len(values) > 1:
            raise DomainError(f"records vary in {name} ({sorted(values)}) as well as in {x}")

    used, excluded = [], []
    for r in records:
        boundary = regime_boundary(law, r.p, r.d) if (law and x == "h") else None
        if boundary is not None and r.h > boundary:
            excluded.append(r.h)
        else:
            used.append(r)
    if excluded:
        logger.info("%s fit excludes pre-asymptotic h=%s", law, excluded)

    xs = [getattr(r, x) for r in used]
    ys = [getattr(r, y) for r in used]
    return fit_series(xs, ys, model, excluded=excluded, law=law)


def fit_groups(records, fits):
    """
    Apply each fit specification to every group of records it covers

    Groups too small to fit are skipped with a warning.

    Returns:
    list of GroupFit
    """
    results = []
    for spec in fits:
        group_by = _group_fields(spec.x)
        chosen = [r for r in records if r.target == spec.target and r.status == OK]
        groups = {}
        for r in chosen:
            groups.setdefault(tuple(getattr(r, f) for f in group_by), []).append(r)

        for key, members in groups.items():
            group = dict(zip(group_by, key))
            suffix = "_".join(f"{f}{_short(group[f])}" for f in ("p", "h", "k", "factor", "scheme") if f in group)
            label = f"{spec.label}_{suffix}" if suffix else spec.label
            members = sorted(members, key=lambda r: getattr(r, spec.x))
            try:
                fit = fit_scaling(members, spec.x, spec.y, spec.model, spec.law)
            except InsufficientDataError as exc:
                logger.warning("fit %s skipped: %s", label, exc)
                continue
            x = np.array([getattr(r, spec.x) for r in members], dtype=float)
            y = np.array([getattr(r, spec.y) for r in members], dtype=float)
            law_values = None
            if spec.law:
                law_values = np.array([
                    reference_law(spec.law, h=r.h, p=r.p, d=r.d, k=r.k, m=r.m) for r in members
                ])
            logger.info("fit %s: slope %.4f (R^2 %.4f, %d points)", label, fit.slope, fit.r2, fit.n_used)
            results.append(GroupFit(label=label, spec=spec, group=group, fit=fit, x=x, y=y, law_values=law_values))
    return results


def _short(value):
    return f"{value:g}" if isinstance(value, float) else str(value)


def fits_frame(group_fits):
    rows = []
    for g in group_fits:
        rows.append({
            "label": g.label,
            "x": g.spec.x,
            "y": g.spec.y,
            "target": g.spec.target,
            **{f: g.group.get(f, NAN) for f in ("domain", "d", "p", "h", "k", "scheme", "factor")},
            "model": g.fit.model,
            "law": g.fit.law or "",
            "slope": g.fit.slope,
            "intercept": g.fit.intercept,
            "r2": g.fit.r2,
            "n_used": g.fit.n_used,
            "excluded": " ".join(f"{v:g}" for v in g.fit.excluded),
            "regime_rule": g.fit.regime_rule,
        })
    return pd.DataFrame(rows)


def write_fits_csv(group_fits, path, echo=None):
    return write_table(fits_frame(group_fits), path, echo)


# -- reference laws -------------------------------------------------------------

@dataclass(frozen=True)
class ReferenceLaw:
    """
    A closed-form estimate with its undetermined constant set to 1

    regularity maps p to the k the law is stated for (None: any k).
    boundary maps (p, d) to the h below which the asymptotic branch applies.
    """
    name: str
    formula: object
    regularity: object = None
    boundary: object = None
    needs: tuple = ("h", "p")


def _max_smooth(p):
    return p - 1


def _c1(p):
    return 1


def _c0(p):
    return 0


def _collocation_boundary(p, d):
    return np.exp(-p * d / 4.0) * p ** (d / 8.0)


def _inverse_degree(p, d):
    return 1.0 / p


def _stiffness_c0_boundary(p, d):
    return np.sqrt(p ** (2.0 + d / 2.0) * 4.0 ** (-d * p))


def _stiffness_smooth_boundary(p, d):
    return np.exp(-p * d / 2.0)


def _branch(h, boundary, inside, outside):
    return inside() if h <= boundary else outside()


E = np.e


def _law_table():
    laws = [
        # least-squares collocation matrix, maximal smoothness
        ReferenceLaw("lsq.sigma_min.A_pm1", lambda h, p, d, m: _branch(
            h, _collocation_boundary(p, d), lambda: 1.0,
            lambda: (E / 2) ** (-2 * d * p) * p ** ((4 / E) ** d) * h ** -2.0),
            _max_smooth, _collocation_boundary),
        ReferenceLaw("lsq.sigma_max.A_pm1", lambda h, p, d, m: h ** -2.0 * p ** 2.0, _max_smooth),
        ReferenceLaw("lsq.cond.A_pm1", lambda h, p, d, m: _branch(
            h, _collocation_boundary(p, d), lambda: h ** -2.0 * p ** 2.0,
            lambda: (E / 2) ** (2 * d * p) * p ** (2 - (4 / E) ** d)),
            _max_smooth, _collocation_boundary),
        # collocation mass matrix, maximal smoothness
        ReferenceLaw("lsq.sigma_min.M_pm1", lambda h, p, d, m: np.exp(-d * p / 2.0), _max_smooth, needs=("p",)),
        ReferenceLaw("lsq.sigma_max.M_pm1", lambda h, p, d, m: 1.0, _max_smooth, needs=()),
        ReferenceLaw("lsq.cond.M_pm1", lambda h, p, d, m: np.exp(d * p / 2.0), _max_smooth, needs=("p",)),
        # C^1 spaces
        ReferenceLaw("lsq.sigma_min.A_1", lambda h, p, d, m: 1.0, _c1, needs=()),
        ReferenceLaw("lsq.sigma_max.A_1", lambda h, p, d, m: h ** -2.0 * p ** 2.5, _c1),
        ReferenceLaw("lsq.cond.A_1", lambda h, p, d, m: h ** -2.0 * p ** 2.5, _c1),
        ReferenceLaw("lsq.sigma_min.M_1", lambda h, p, d, m: (2.0 * d) ** -p, _c1, needs=("p",)),
        ReferenceLaw("lsq.sigma_max.M_1", lambda h, p, d, m: 1.0, _c1, needs=()),
        ReferenceLaw("lsq.cond.M_1", lambda h, p, d, m: (2.0 * d) ** p, _c1, needs=("p",)),
        # growth with the number of collocation points
        ReferenceLaw("lsq.sigma_max_m.A_pm1", lambda h, p, d, m: m ** 0.55, _max_smooth, needs=("m",)),
        ReferenceLaw("lsq.sigma_min_m.A_pm1", lambda h, p, d, m: m ** 0.55, _max_smooth, needs=("m",)),
        ReferenceLaw("lsq.sigma_max_m.A_1", lambda h, p, d, m: m ** 0.48, _c1, needs=("m",)),
        ReferenceLaw("lsq.sigma_min_m.A_1", lambda h, p, d, m: m ** 0.48, _c1, needs=("m",)),
        # Galerkin mass and stiffness matrices, C^0
        ReferenceLaw("galerkin.lambda_min.M_0", lambda h, p, d, m: h ** d * p ** (-d / 2.0) * 4.0 ** (-p * d), _c0),
        ReferenceLaw("galerkin.lambda_max.M_0", lambda h, p, d, m: h ** d * p ** (-d), _c0),
        ReferenceLaw("galerkin.cond.M_0", lambda h, p, d, m: p ** (-d / 2.0) * 4.0 ** (p * d), _c0, needs=("p",)),
        ReferenceLaw("galerkin.lambda_min.K_0", lambda h, p, d, m: _branch(
            h, _stiffness_c0_boundary(p, d), lambda: h ** d * p ** (-d),
            lambda: h ** (d - 2) * p ** (2 - d / 2.0) * 4.0 ** (-d * p)),
            _c0, _stiffness_c0_boundary),
        ReferenceLaw("galerkin.lambda_max.K_0", lambda h, p, d, m: h ** (d - 2.0) * p ** (2.0 - d), _c0),
        ReferenceLaw("galerkin.cond.K_0", lambda h, p, d, m: _branch(
            h, _stiffness_c0_boundary(p, d), lambda: h ** -2.0 * p ** 2.0,
            lambda: p ** (-d / 2.0) * 4.0 ** (d * p)),
            _c0, _stiffness_c0_boundary),
        # Galerkin, maximal smoothness
        ReferenceLaw("galerkin.lambda_min.M_pm1", lambda h, p, d, m: _branch(
            h, 1.0 / p, lambda: h ** d * np.exp(-p * d),
            lambda: (E / 4) ** (-d / h) * (h / p) ** (d / 2.0) * 4.0 ** (-p * d)),
            _max_smooth, _inverse_degree),
        ReferenceLaw("galerkin.lambda_max.M_pm1", lambda h, p, d, m: _branch(
            h, 1.0 / p, lambda: h ** d, lambda: p ** (-d)),
            _max_smooth, _inverse_degree),
        ReferenceLaw("galerkin.cond.M_pm1", lambda h, p, d, m: _branch(
            h, 1.0 / p, lambda: np.exp(p * d),
            lambda: (E / 4) ** (d / h) * (h * p) ** (-d / 2.0) * 4.0 ** (p * d)),
            _max_smooth, _inverse_degree),
        ReferenceLaw("galerkin.lambda_min.K_pm1", lambda h, p, d, m: _branch(
            h, np.exp(-p * d / 2.0), lambda: h ** d,
            lambda: _branch(h, 1.0 / p, lambda: h ** (d - 2.0) * np.exp(-p * d),
                            lambda: (E / 4) ** (-d / h) * p ** (2 - d / 2.0) * h ** (d / 2.0) * 4.0 ** (-p * d))),
            _max_smooth, _stiffness_smooth_boundary),
        ReferenceLaw("galerkin.lambda_max.K_pm1", lambda h, p, d, m: (
            p * h ** (d - 2.0) if (h <= 1.0 / p and p > 2) else p ** (2.0 - d) / h),
            _max_smooth, _inverse_degree),
        ReferenceLaw("galerkin.cond.K_pm1", lambda h, p, d, m: _branch(
            h, np.exp(-p * d / 2.0), lambda: h ** -2.0 * p,
            lambda: _branch(h, 1.0 / p, lambda: p * np.exp(d * p),
                            lambda: (E / 4) ** (d / h) * p ** (-d / 2.0) * h ** (-d / 2.0 - 1) * 4.0 ** (d * p))),
            _max_smooth, _stiffness_smooth_boundary),
        # upper bounds for the Galerkin condition numbers
        ReferenceLaw("bound.cond.M", lambda h, p, d, m: p ** 2.0 * 16.0 ** p, needs=("p",)),
        ReferenceLaw("bound.cond.K", lambda h, p, d, m: p ** 8.0 * 16.0 ** p, needs=("p",)),
    ]
    return {law.name: law for law in laws}


LAWS = _law_table()


def _get_law(name):
    try:
        return LAWS[name]
    except KeyError:
        raise UnknownLawError(f"unknown reference law '{name}'") from None


def reference_law(name, h=None, p=None, d=1, k=None, m=None):
    """
    Evaluate a named estimate with its constant set to 1

    Names read <method>.<quantity>.<family>, e.g. 'lsq.cond.M_1' or
    'galerkin.lambda_min.K_pm1'; the family suffix fixes the regularity
    (_pm1: k = p-1, _1: k = 1, _0: k = 0), which is checked when k is given.

    Returns:
    float
    """
    law = _get_law(name)
    supplied = {"h": h, "p": p, "m": m}
    missing = [arg for arg in law.needs if supplied[arg] is None]
    if missing:
        raise DomainError(f"{name} needs {missing}")
    if k is not None and p is not None and law.regularity is not None and law.regularity(p) != k:
        raise DomainError(f"{name} is stated for k={law.regularity(p)}, got k={k} at p={p}")
    return float(law.formula(h, p, d, m))


def regime_boundary(name, p, d=1):
    """h below which the asymptotic branch of a law applies, or None for laws without a split"""
    law = _get_law(name)
    return None if law.boundary is None else float(law.boundary(p, d))
