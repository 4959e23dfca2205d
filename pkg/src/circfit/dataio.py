"""CSV and JSON plumbing: dataset ingestion, result emission, run manifests.

Every write goes through a temp-file-then-rename step so a crashed run never
leaves a half-written artifact, and every float is emitted in full double
precision scientific notation (no rounding in files).
"""

import csv
import json
import os
import platform
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .angles import wrap_angle
from .exceptions import DataError
from .fit import Dataset

_NA_TOKENS = {"", "na", "nan", "null"}

FLOAT_FORMAT = "%.17e"


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def _atomic_write(path, writer):
    """Run writer(file handle) against a temp file, fsync, then rename."""
    target = os.path.abspath(os.fspath(path))
    fd, tmp = tempfile.mkstemp(
        dir=os.path.dirname(target), prefix=".tmp-", suffix="-" + os.path.basename(target)
    )
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            writer(handle)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _write_table(path, header, rows):
    def writer(handle):
        out = csv.writer(handle)
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])

    _atomic_write(path, writer)


@dataclass(frozen=True)
class LoadReport:
    """Ingestion bookkeeping: total data rows seen, rows kept, and the file
    line numbers (1-based, header included) of rows dropped for missing
    values."""

    rows_total: int
    rows_used: int
    na_lines: tuple


def _parse_cell(text, column, line_no):
    token = text.strip()
    if token.lower() in _NA_TOKENS:
        return None
    try:
        return float(token)
    except ValueError:
        raise DataError(
            f"non-numeric value {token!r} in column {column} at line {line_no}"
        ) from None


def load_dataset(path, units="rad"):
    """Read a dataset CSV with columns theta, w and optional x.

    units applies to theta: "rad" (default) or "deg".  Angles are wrapped to
    [-pi, pi).  Rows with a missing value in any used column are dropped and
    reported through the returned LoadReport.
    """
    if units not in ("rad", "deg"):
        raise DataError(f"unknown angle units {units!r}")
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        names = [cell.strip().lower() for cell in header]
        columns = {}
        for required in ("theta", "w"):
            if required not in names:
                raise DataError(f"{path} is missing required column {required!r}")
            columns[required] = names.index(required)
        has_x = "x" in names
        if has_x:
            columns["x"] = names.index("x")
        theta, w, x = [], [], []
        total = 0
        na_lines = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            total += 1
            if len(row) < len(names):
                raise DataError(f"short row at line {line_no} in {path}")
            vals = {
                name: _parse_cell(row[idx], name, line_no)
                for name, idx in columns.items()
            }
            if any(v is None for v in vals.values()):
                na_lines.append(line_no)
                continue
            theta.append(vals["theta"])
            w.append(vals["w"])
            if has_x:
                x.append(vals["x"])
    if not theta:
        raise DataError(f"no usable rows in {path}")
    theta = np.asarray(theta)
    if units == "deg":
        theta = np.radians(theta)
    dataset = Dataset(
        wrap_angle(theta), np.asarray(w), x=np.asarray(x) if has_x else None
    )
    return dataset, LoadReport(total, dataset.n, tuple(na_lines))


def write_dataset(dataset, path):
    header = ["theta", "w"] + (["x"] if dataset.x is not None else [])
    if dataset.x is not None:
        rows = zip(dataset.theta, dataset.w, dataset.x)
    else:
        rows = zip(dataset.theta, dataset.w)
    _write_table(path, header, rows)


def write_fit_result(result, path):
    _write_table(
        path,
        ["x", "g1", "g2", "m_hat", "defined"],
        zip(result.points, result.g1, result.g2, result.m_hat, result.defined),
    )


def read_fit_result(path):
    """Columns of a fit CSV as arrays (keys x, g1, g2, m_hat, defined)."""
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        rows = list(reader)
    if not rows:
        raise DataError(f"no rows in {path}")
    out = {}
    for key in ("x", "g1", "g2", "m_hat"):
        out[key] = np.array([float(r[key]) for r in rows])
    out["defined"] = np.array([r["defined"] == "1" for r in rows])
    return out


def write_bandwidth_report(report, path):
    header = ["candidate", "loss"]
    cols = [report.candidates, report.losses]
    if report.losses_stage2 is not None:
        header.append("loss_stage2")
        cols.append(report.losses_stage2)
    _write_table(path, header, zip(*cols))


def write_records(records, path):
    header = [
        "scenario", "procedure", "replicate", "risk", "h",
        "boundary_hit", "undefined", "seconds", "status", "message",
    ]
    _write_table(path, header, ([r[k] for k in header] for r in records))


def write_fitted(rows, path):
    header = ["scenario", "procedure", "replicate", "x", "m_hat", "defined"]
    _write_table(path, header, ([r[k] for k in header] for r in rows))


def read_config(path):
    """Flat key=value configuration; '#' starts a comment, blanks ignored."""
    out = {}
    try:
        handle = open(path)
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from None
    with handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            key, sep, value = text.partition("=")
            if not sep or not key.strip():
                raise DataError(f"malformed config line {line_no} in {path}")
            out[key.strip()] = value.strip()
    return out


def write_manifest(path, command, parameters, seed, outputs, wall_clock_s):
    """Record what a run did: command, parameters, seed, library versions,
    output files, wall-clock seconds.  A run is reproducible from this file
    plus the inputs it names."""
    from . import __version__
    from ._backend import BACKEND

    manifest = {
        "command": command,
        "parameters": parameters,
        "seed": seed,
        "versions": {
            "circfit": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "backend": BACKEND,
        },
        "outputs": list(outputs),
        "wall_clock_s": wall_clock_s,
        "argv": sys.argv[1:],
    }

    def writer(handle):
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")

    _atomic_write(path, writer)
