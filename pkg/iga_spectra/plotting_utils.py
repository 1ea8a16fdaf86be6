"""
Plot-ready table output for spectral experiments
Series are written as plain two-column CSV files for any external plotting tool
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# Axis scales by fit model
LOG_LOG = "loglog"
SEMI_LOG = "semilogy"


def echo_lines(echo):
    """Prefix every line of an echoed config with '# '"""
    if not echo:
        return []
    return [f"# {line}".rstrip() for line in echo.splitlines()]


def write_table(frame, path, echo=None):
    """
    Write a DataFrame as CSV preceded by the echoed config as comment lines

    Read it back with pandas.read_csv(path, comment='#').

    Parameters:
    frame: pandas DataFrame
    path: output file
    echo: config text to place in the header, or None

    Returns:
    Path of the written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        for line in echo_lines(echo):
            handle.write(line + "\n")
        frame.to_csv(handle, index=False)
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


def scale_for_model(model):
    """Axis scaling that turns the fit model into a straight line"""
    return SEMI_LOG if model.startswith("exp_") else LOG_LOG


def fit_line(model, slope, intercept, x):
    """
    Evaluate a fitted scaling law

    Parameters:
    model: 'power_in_*' (y = e^b x^a) or 'exp_in_*' (y = e^(b + a x))
    slope: exponent or rate a
    intercept: b, in natural-log units
    x: abscissae

    Returns:
    numpy array of y values
    """
    x = np.asarray(x, dtype=float)
    if scale_for_model(model) == SEMI_LOG:
        return np.exp(intercept + slope * x)
    return np.exp(intercept) * x ** slope


def anchored_curve(x, law_values, y_anchor):
    """
    Scale a reference-law curve so that it passes through the first measured point

    The laws carry an undetermined constant; only their shape is comparable.
    """
    law_values = np.asarray(law_values, dtype=float)
    if law_values.size == 0 or not np.isfinite(law_values[0]) or law_values[0] == 0.0:
        return law_values
    return law_values * (y_anchor / law_values[0])


def series_frame(x, y, x_name="x", y_name="y"):
    order = np.argsort(np.asarray(x, dtype=float))
    return pd.DataFrame({
        x_name: np.asarray(x, dtype=float)[order],
        y_name: np.asarray(y, dtype=float)[order],
    })


def write_fit_series(out_dir, label, x, y, fit, law_values=None, echo=None, x_name="x", y_name="y"):
    """
    Write the measured data, fitted line and optional reference curve of one fit

    Files are named <label>.data.csv, <label>.fit.csv and <label>.law.csv; the
    axis scale suited to the model is recorded in the header.

    Parameters:
    out_dir: directory receiving the files
    label: file stem
    x, y: measured series
    fit: FitResult with model, slope and intercept
    law_values: reference law evaluated at x, or None
    echo: config text for the header

    Returns:
    list of written paths
    """
    out_dir = Path(out_dir)
    scale = scale_for_model(fit.model)
    header = "\n".join(filter(None, [f"scale = \"{scale}\"", echo]))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    written = [write_table(series_frame(x, y, x_name, y_name), out_dir / f"{label}.data.csv", header)]

    fine = np.linspace(x.min(), x.max(), 50) if x.size else x
    fitted = fit_line(fit.model, fit.slope, fit.intercept, fine)
    written.append(write_table(series_frame(fine, fitted, x_name, y_name), out_dir / f"{label}.fit.csv", header))

    if law_values is not None and x.size:
        order = np.argsort(x)
        curve = anchored_curve(x[order], np.asarray(law_values, dtype=float)[order], y[order][0])
        written.append(write_table(series_frame(x[order], curve, x_name, y_name), out_dir / f"{label}.law.csv", header))

    logger.info("plot series for %s written to %s (%s)", label, out_dir, scale)
    return written
