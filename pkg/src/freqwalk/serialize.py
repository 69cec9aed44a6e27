"""CSV serialization with bit-exact numeric round-trips.

Files start with a `# meta {json}` line carrying the generation metadata and,
unless disabled, a `# written <iso time>` line; both are ignored by readers
except for recovering the metadata. Floats are written in shortest
round-trip decimal form (up to 17 significant digits), so read(write(x))
reproduces every double bit for bit. All writes go to a temp file in the
target directory followed by an atomic rename.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from datetime import datetime, timezone

import numpy as np

from .dynamics import GainVector
from .criteria import InvalidSample, StabilityReport
from .errors import SchemaError
from .sampler import Dataset, SampleRecord

THETA_COLUMNS = ["K11", "K12", "K21", "K22"]
LABELED_COLUMNS = THETA_COLUMNS + ["label", "rocof_hz_s", "nadir_hz", "ss_hz", "t_rocof", "t_nadir"]
DATASET_COLUMNS = LABELED_COLUMNS + ["converged", "iterations"]
TRAJECTORY_COLUMNS = ["t", "omega_pu", "omegadot_pu"]
# tangent columns: s<row><param>, parameter-major
TANGENT_COLUMNS = [f"s{r}{i}" for i in range(1, 5) for r in (1, 2)]
BENCH_COLUMNS = [
    "method", "memory_bytes", "time_s",
    "err_x_tss", "err_x_tnadir", "err_x_trocof", "err_g_nadir", "err_g_rocof",
]


def fmt(x: float) -> str:
    return repr(float(x))


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise SchemaError(
            f"row {row}, column {column}: {text!r} is not a number", row=row, column=column
        ) from exc


class _AtomicFile:
    """Write-temp-then-rename so readers never observe partial files."""

    def __init__(self, path):
        self.path = os.fspath(path)
        d = os.path.dirname(self.path) or "."
        fd, self.tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".csv")
        self.fh = os.fdopen(fd, "w", newline="")

    def __enter__(self):
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            os.unlink(self.tmp)
        return False


def _write_preamble(fh, meta: dict | None, timestamp: bool):
    if meta is not None:
        fh.write("# meta " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    if timestamp:
        fh.write("# written " + datetime.now(timezone.utc).isoformat() + "\n")


def _read_rows(path, *expected_headers):
    """Returns (meta or None, rows, matched header); header must match one option."""
    meta = None
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    with fh:
        header = None
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("# meta "):
                try:
                    meta = json.loads(line[len("# meta "):])
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"line {lineno}: bad meta JSON", row=lineno) from exc
                continue
            if line.startswith("#"):
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = cells
                if header not in [list(h) for h in expected_headers]:
                    raise SchemaError(
                        f"header mismatch: expected {expected_headers[0]}, got {header}",
                        row=lineno,
                    )
                continue
            if cells:
                rows.append((lineno, cells))
        if header is None:
            raise SchemaError("file has no header row")
    return meta, rows, header


def _check_width(cells, lineno, expected_header):
    if len(cells) != len(expected_header):
        raise SchemaError(
            f"row {lineno}: expected {len(expected_header)} cells, got {len(cells)}", row=lineno
        )


# -- gain vectors -----------------------------------------------------------

def write_theta_csv(thetas, path, meta=None, timestamp=True):
    with _AtomicFile(path) as fh:
        _write_preamble(fh, meta, timestamp)
        w = csv.writer(fh)
        w.writerow(THETA_COLUMNS)
        for t in thetas:
            w.writerow([fmt(v) for v in t.as_array()])


def read_theta_csv(path):
    """Returns (list of GainVector, meta dict or None)."""
    meta, rows, _ = _read_rows(path, THETA_COLUMNS)
    out = []
    for lineno, cells in rows:
        _check_width(cells, lineno, THETA_COLUMNS)
        vals = [_parse_float(c, lineno, col) for c, col in zip(cells, THETA_COLUMNS)]
        out.append(GainVector.from_array(np.array(vals)))
    return out, meta


# -- labeled samples --------------------------------------------------------

def _label_cells(outcome) -> list:
    if isinstance(outcome, InvalidSample):
        return ["invalid"] + [fmt(float("nan"))] * 5
    r: StabilityReport = outcome
    return [
        str(r.label),
        fmt(r.rocof_hz_s), fmt(r.nadir_hz), fmt(r.ss_hz),
        fmt(r.critical.t_rocof), fmt(r.critical.t_nadir),
    ]


def write_labeled_csv(thetas, outcomes, path, meta=None, timestamp=True):
    with _AtomicFile(path) as fh:
        _write_preamble(fh, meta, timestamp)
        w = csv.writer(fh)
        w.writerow(LABELED_COLUMNS)
        for theta, outcome in zip(thetas, outcomes):
            w.writerow([fmt(v) for v in theta.as_array()] + _label_cells(outcome))


def _parse_label(text: str, lineno: int):
    if text == "invalid":
        return "invalid"
    if text in ("0", "1"):
        return int(text)
    raise SchemaError(f"row {lineno}: label must be 0, 1 or invalid, got {text!r}",
                      row=lineno, column="label")


def read_labeled_csv(path):
    """Returns (list of row dicts, meta)."""
    meta, rows, _ = _read_rows(path, LABELED_COLUMNS)
    out = []
    for lineno, cells in rows:
        _check_width(cells, lineno, LABELED_COLUMNS)
        rec = {
            "theta": GainVector.from_array(
                np.array([_parse_float(c, lineno, n) for c, n in zip(cells[:4], THETA_COLUMNS)])
            ),
            "label": _parse_label(cells[4], lineno),
        }
        for name, cell in zip(LABELED_COLUMNS[5:], cells[5:]):
            rec[name] = _parse_float(cell, lineno, name)
        out.append(rec)
    return out, meta


# -- walked datasets --------------------------------------------------------

def write_dataset_csv(dataset: Dataset, path, timestamp=True):
    with _AtomicFile(path) as fh:
        _write_preamble(fh, dataset.metadata or None, timestamp)
        w = csv.writer(fh)
        w.writerow(DATASET_COLUMNS)
        for rec in dataset.records:
            outcome = rec.report_final if rec.report_final is not None else InvalidSample(
                theta=rec.theta_final, kind=rec.failure or "invalid", message=""
            )
            w.writerow(
                [fmt(v) for v in rec.theta_final.as_array()]
                + _label_cells(outcome)
                + [str(int(rec.converged)), str(rec.iterations)]
            )


def read_dataset_csv(path):
    """Returns (list of row dicts, meta). Rows carry the serialized fields only."""
    meta, rows, _ = _read_rows(path, DATASET_COLUMNS)
    out = []
    for lineno, cells in rows:
        _check_width(cells, lineno, DATASET_COLUMNS)
        rec = {
            "theta": GainVector.from_array(
                np.array([_parse_float(c, lineno, n) for c, n in zip(cells[:4], THETA_COLUMNS)])
            ),
            "label": _parse_label(cells[4], lineno),
        }
        for name, cell in zip(LABELED_COLUMNS[5:], cells[5:10]):
            rec[name] = _parse_float(cell, lineno, name)
        if cells[10] not in ("0", "1"):
            raise SchemaError(f"row {lineno}: converged must be 0 or 1", row=lineno, column="converged")
        rec["converged"] = cells[10] == "1"
        try:
            rec["iterations"] = int(cells[11])
        except ValueError as exc:
            raise SchemaError(f"row {lineno}: iterations must be an integer",
                              row=lineno, column="iterations") from exc
        out.append(rec)
    return out, meta


# -- trajectories -----------------------------------------------------------

def write_trajectory_csv(traj, path, include_tangents=False, meta=None, timestamp=True):
    cols = list(TRAJECTORY_COLUMNS)
    if include_tangents:
        if traj.tangents is None or traj.tangents.ndim != 3:
            raise SchemaError("trajectory has no per-parameter tangents to write")
        cols += TANGENT_COLUMNS
    with _AtomicFile(path) as fh:
        _write_preamble(fh, meta, timestamp)
        w = csv.writer(fh)
        w.writerow(cols)
        for k in range(len(traj.times)):
            row = [fmt(traj.times[k]), fmt(traj.states[k, 0]), fmt(traj.states[k, 1])]
            if include_tangents:
                row += [fmt(traj.tangents[k, r, i]) for i in range(4) for r in (0, 1)]
            w.writerow(row)


def read_trajectory_csv(path):
    """Returns (times, states, tangents or None, meta)."""
    meta, rows, header = _read_rows(
        path, TRAJECTORY_COLUMNS, TRAJECTORY_COLUMNS + TANGENT_COLUMNS
    )
    with_tan = len(header) > 3
    times, states, tangents = [], [], []
    for lineno, cells in rows:
        _check_width(cells, lineno, header)
        vals = [_parse_float(c, lineno, n) for c, n in zip(cells, header)]
        times.append(vals[0])
        states.append(vals[1:3])
        if with_tan:
            block = np.empty((2, 4))
            for i in range(4):
                block[0, i] = vals[3 + 2 * i]
                block[1, i] = vals[4 + 2 * i]
            tangents.append(block)
    return (
        np.array(times),
        np.array(states).reshape(-1, 2),
        np.array(tangents) if with_tan else None,
        meta,
    )


# -- gradient tables --------------------------------------------------------

GRADIENT_COLUMNS = ["method", "criterion", "dk11", "dk12", "dk21", "dk22"]


def write_gradients_csv(gradient_sets: dict, path, meta=None, timestamp=True):
    """One row per (method, criterion); gradient_sets maps method name -> GradientSet."""
    with _AtomicFile(path) as fh:
        _write_preamble(fh, meta, timestamp)
        w = csv.writer(fh)
        w.writerow(GRADIENT_COLUMNS)
        for name, gset in gradient_sets.items():
            for crit in ("rocof", "nadir", "ss"):
                w.writerow([name, crit] + [fmt(v) for v in gset.get(crit)])


# -- benchmark reports ------------------------------------------------------

def write_bench_csv(report, path, meta=None, timestamp=True):
    """One row per method, reference first, mirroring the comparison table."""
    names = [report.reference] + [m for m in report.methods if m != report.reference]
    with _AtomicFile(path) as fh:
        _write_preamble(fh, meta, timestamp)
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for name in names:
            s = report.methods[name]
            w.writerow([
                name, str(s.memory_bytes), fmt(s.time_s),
                fmt(s.err_x_tss), fmt(s.err_x_tnadir), fmt(s.err_x_trocof),
                fmt(s.err_g_nadir), fmt(s.err_g_rocof),
            ])
