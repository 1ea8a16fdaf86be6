#!/usr/bin/env python3
"""
Command-line front end for iga-spectra experiments

    iga-spectra points --scheme sc --p 4 --n 2
    iga-spectra spectra --config configs/interval_cp1.toml
    iga-spectra sweep --config configs/annulus_mass.toml --threads 4
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .assembly import assemble, export_matrix_market, export_occupancy_csv, normal_product_pattern
from .collocation_points import build_collocation_set, greville_points, tensorize, write_points_csv
from .config import K_MODES, config_to_toml, load_config, resolve_regularity, toml_table, with_overrides
from .constants import SWEEP_COLUMNS, THREADS_ENV_VAR
from .errors import (
    ConfigError,
    DimensionMismatchError,
    DomainError,
    InsufficientDataError,
    NumericalError,
    UnknownLawError,
)
from .geometry import make_patch
from .lsq_solver import get_case, max_error, solve_least_squares, write_samples_csv, write_solution_csv
from .plotting_utils import write_fit_series, write_table
from .spline_core import make_space
from .sweep_lab import fit_groups, run_configuration, run_sweep, write_fits_csv, write_records_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SPECTRA_COLUMNS = SWEEP_COLUMNS + ("iterations", "residual_max", "residual_min")


def _tag(config, point):
    return f"{config.domain}_p{point.p}_n{point.n}_k{point.k}_{point.scheme}_f{point.factor:g}"


def _threads_override(args):
    """--threads, else the environment fallback, else None (keep the file value)"""
    if args.threads is not None:
        return args.threads
    value = os.environ.get(THREADS_ENV_VAR)
    if not value:
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(THREADS_ENV_VAR, f"expected an integer, got {value!r}") from None


def _load(args):
    if not args.config:
        raise ConfigError("--config", "this command needs an experiment file")
    config = load_config(args.config)
    return with_overrides(
        config,
        output=args.out,
        threads=_threads_override(args),
        dense_threshold=args.dense_threshold,
        seed=args.seed,
    )


def _echo(config):
    return config_to_toml(config)


def _annotate(exc, config, point):
    exc.add_note(f"failing grid point: {point}")
    exc.add_note(_echo(config))


def _build_system(config, point, threads=1):
    patch = make_patch(config.domain, config.geometry)
    space = make_space(point.p, point.n, point.k, config.dim)
    points = build_collocation_set(point.scheme, space, point.factor)
    return assemble(space, patch, points, source=get_case(config.source).source, threads=threads)


def _parse_k(value, p):
    mode = value
    if mode not in K_MODES:
        try:
            mode = int(value)
        except ValueError:
            raise ConfigError("k", f"expected one of {K_MODES} or an integer, got {value!r}") from None
    return resolve_regularity(mode, p)


# -- subcommands ------------------------------------------------------------------

def cmd_points(args):
    config = _load(args) if args.config else None
    scheme = args.scheme or (config.schemes[0] if config else "greville")
    p = args.p if args.p is not None else (config.p[0] if config else None)
    n = args.n if args.n is not None else (config.n[0] if config else None)
    factor = args.factor if args.factor is not None else (config.factor[0] if config else 1.0)
    dim = args.dim or (config.dim if config else 1)
    out = Path(args.out or (config.output if config else "results"))
    if p is None:
        raise ConfigError("p", "a degree is required (--p or a config file)")

    if scheme == "greville" and args.m is not None:
        points = tensorize([greville_points(p, args.m)] * dim, scheme)
        description = {"scheme": scheme, "p": p, "m": args.m, "dim": dim}
    else:
        if n is None:
            raise ConfigError("n", "a span count is required (--n or a config file)")
        if args.k is not None:
            k = _parse_k(args.k, p)
        elif config is not None:
            k = resolve_regularity(config.k[0], p)
        else:
            k = p - 1
        space = make_space(p, n, k, dim)
        points = build_collocation_set(scheme, space, factor)
        description = {"scheme": scheme, "p": p, "n": n, "k": k, "factor": float(factor), "dim": dim}

    path = write_points_csv(points, out / f"points_{scheme}_p{p}.csv", "\n".join(toml_table("[points]", description)))
    print(f"✅ {points.m} points ({points.m_in} interior) written to {path}")
    return EXIT_OK


def cmd_assemble(args):
    config = _load(args)
    out = Path(config.output)
    echo = _echo(config)
    for point in config.grid():
        try:
            system = _build_system(config, point, config.threads)
        except NumericalError as exc:
            _annotate(exc, config, point)
            raise
        tag = _tag(config, point)
        nnz, pattern = normal_product_pattern(system.A)
        export_matrix_market(system.A, out / f"A_{tag}.mtx", echo)
        export_matrix_market(system.M, out / f"M_{tag}.mtx", echo)
        export_occupancy_csv(pattern, out / f"AtA_pattern_{tag}.csv", echo)
        write_table(pd.DataFrame({"row": np.arange(len(system.b)), "b": system.b}), out / f"b_{tag}.csv", echo)
        print(f"✅ {tag}: A {system.A.shape[0]} x {system.A.shape[1]}, nnz(A)={system.A.nnz}, nnz(AtA)={nnz}")
    return EXIT_OK


def cmd_spectra(args):
    config = _load(args)
    records = []
    for point in config.grid():
        try:
            records.extend(run_configuration(config, point, strict=True))
        except NumericalError as exc:
            _annotate(exc, config, point)
            raise
    path = write_records_csv(records, Path(config.output) / "spectra.csv", _echo(config), SPECTRA_COLUMNS)
    for r in records:
        print(f"  {r.target} p={r.p} h={r.h:g} k={r.k} {r.scheme}: cond={r.cond:.6e} ({r.method})")
    print(f"✅ {len(records)} spectral reports written to {path}")
    return EXIT_OK


def cmd_solve(args):
    config = _load(args)
    out = Path(config.output)
    echo = _echo(config)
    case = get_case(config.source)
    for point in config.grid():
        try:
            system = _build_system(config, point, config.threads)
            solution = solve_least_squares(system, config.dense_threshold)
        except NumericalError as exc:
            _annotate(exc, config, point)
            raise
        tag = _tag(config, point)
        write_solution_csv(solution, out / f"solution_{tag}.csv", echo)
        write_samples_csv(solution, system.space, system.patch, out / f"samples_{tag}.csv", args.samples, echo)
        error = max_error(solution, system.space, system.patch, case, args.samples)
        print(f"✅ {tag}: residual {solution.residual_norm:.3e}, max error vs '{case.name}' {error:.3e} ({solution.method})")
    return EXIT_OK


def cmd_sweep(args):
    config = _load(args)
    out = Path(config.output)
    echo = _echo(config)
    records = run_sweep(config)
    path = write_records_csv(records, out / "sweep.csv", echo)
    failed = [r for r in records if r.status != "ok"]
    print(f"✅ {len(records)} records written to {path} ({len(failed)} failed)")

    group_fits = fit_groups(records, config.fits)
    if group_fits:
        write_fits_csv(group_fits, out / "fits.csv", echo)
        for g in group_fits:
            write_fit_series(out / "series", g.label, g.x, g.y, g.fit, g.law_values, echo,
                             x_name=g.spec.x, y_name=g.spec.y)
            print(f"  {g.label}: slope {g.fit.slope:.4f} (R^2 {g.fit.r2:.4f})")
    return EXIT_OK


COMMANDS = {
    "points": cmd_points,
    "assemble": cmd_assemble,
    "spectra": cmd_spectra,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment TOML file")
    common.add_argument("--out", help="output directory (overrides experiment.output)")
    common.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV_VAR})")
    common.add_argument("--dense-threshold", type=int, help="largest column count for the dense SVD/QR paths")
    common.add_argument("--seed", type=int, help="seed of the iterative start vectors")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="iga-spectra",
        description="Spectral experiments for isogeometric least-squares collocation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    points = sub.add_parser("points", parents=[common], help="write a collocation point set")
    points.add_argument("--scheme", help="greville, sc or cg")
    points.add_argument("--p", type=int, help="degree")
    points.add_argument("--n", type=int, help="number of knot spans")
    points.add_argument("--m", type=int, help="Greville points per direction")
    points.add_argument("--k", help="regularity: cp-1, c1 or an integer (default p-1)")
    points.add_argument("--factor", type=float, help="Greville oversampling factor")
    points.add_argument("--dim", type=int, help="tensorize to this many directions")

    sub.add_parser("assemble", parents=[common], help="export A, M, b and the A^T A pattern")
    sub.add_parser("spectra", parents=[common], help="extreme singular values per grid point")
    solve = sub.add_parser("solve", parents=[common], help="least-squares solve of the manufactured case")
    solve.add_argument("--samples", type=int, default=21, help="sample points per direction")
    sub.add_parser("sweep", parents=[common], help="full sweep with scaling-law fits")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError, DimensionMismatchError, InsufficientDataError, UnknownLawError) as exc:
        print(f"❌ invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"❌ numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        for note in getattr(exc, "__notes__", []):
            print(note, file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
