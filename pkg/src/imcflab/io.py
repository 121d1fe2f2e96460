"""File formats: node fields, harmonic coefficients, traces and JSON reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import flow as flowmod
from .errors import InputError
from .sphere import SphereField, SphereGrid

TRACE_COLUMNS = (
    "t",
    "area",
    "mH",
    "mtilde",
    "Q",
    "minH",
    "maxH",
    "mono_residual",
    "hev_residual",
    "aring_residual",
    "pinch1",
    "pinch2",
)


def fmt(x):
    """Shortest round-tripping text for a float; empty for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def clean(obj):
    """Recursively convert numpy scalars/arrays into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(clean(obj), sort_keys=True, indent=2) + "\n")
    return path


def grid_from_header(h):
    try:
        if h["mode"] == "full":
            return SphereGrid(3, int(h["lmax"]), "full", int(h["nlat"]), int(h["nlon"]))
        return SphereGrid(int(h["n"]), int(h["lmax"]), "polar", int(h["nlat"]))
    except KeyError as exc:
        raise InputError(f"grid header lacks {exc.args[0]!r}") from None


# -- node fields --------------------------------------------------------------
def write_field(path, field, fmt_="csv", name=None):
    """Write node values plus a ``<path>.json`` header.

    ``csv``: one row per colatitude, longitudes across (row-major);
    ``bin``: raw little-endian float64 in the same order.
    """
    path = Path(path)
    header = field.grid.header()
    header["format"] = fmt_
    header["dtype"] = "<f8"
    if name:
        header["name"] = name
    vals = np.atleast_2d(field.values) if field.grid.mode == "full" else field.values[:, None]
    if fmt_ == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            for row in vals:
                w.writerow([fmt(v) for v in row])
    elif fmt_ == "bin":
        path.write_bytes(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    else:
        raise InputError(f"unknown field format {fmt_!r}")
    write_json(Path(str(path) + ".json"), header)
    return path


def read_field(path):
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    grid = grid_from_header(header)
    if header.get("format") == "bin":
        vals = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(grid.shape).copy()
    else:
        with path.open(newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh)]
        vals = np.array(rows, dtype=float).reshape(grid.shape)
    return SphereField(grid, vals)


# -- coefficients ---------------------------------------------------------------
def coeffs_document(grid, coeffs):
    return {"grid": grid.header(nodes=False), "coefficients": grid.coeffs_to_list(coeffs)}


def write_coeffs(path, grid, coeffs):
    return write_json(path, coeffs_document(grid, coeffs))


def read_coeffs(path):
    doc = json.loads(Path(path).read_text())
    grid = grid_from_header(doc["grid"])
    return grid, grid.coeffs_from_list(doc["coefficients"])


# -- traces ---------------------------------------------------------------------
def trace_rows(trace):
    mono = flowmod.residual_series(trace, "mono" if trace.n == 3 else "qdrift")
    hev = flowmod.residual_series(trace, "hev")
    aring = flowmod.residual_series(trace, "aring")
    p1, p2 = trace.pinch_columns()
    rows = []
    for k, s in enumerate(trace.samples):
        rows.append(
            [s.t, s.area, s.mH, s.mtilde, s.Q, s.minH, s.maxH, mono[k], hev[k], aring[k], p1[k], p2[k]]
        )
    return rows


def write_trace_csv(path, trace):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in trace_rows(trace):
            w.writerow([fmt(v) for v in row])
    return path


def read_trace_csv(path):
    """Columns of a trace CSV as a dict of float arrays."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return {c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows]) for c in reader.fieldnames}
