"""
Text codecs for dictionaries, signals, matrices, traces and reports.

Formats
-------
  GREEDYDICT v1 n=<dim> p=<p> N=<count>     then N rows of n floats (one element per row)
  GREEDYMAT v1 rows=<n1> cols=<n2>          then n1 rows of n2 floats
  GREEDYSIG v1 n=<dim>                      then one row of n floats
  trace CSV                                 fixed columns, see ``trace.CSV_COLUMNS``
  report JSON                               {"schema_version": ..., ...}

Floats are written with 17 significant digits so that a write/read cycle
reproduces every float64 exactly.  Dictionary rows whose norm is off by at
most 1e-6 are renormalized on read (rows already inside the unit-norm
tolerance are kept bit for bit); larger deviations are a format error.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from pathlib import Path
from typing import Any, List, Union

import numpy as np

from greedy.dictionary import Dictionary
from greedy.errors import FormatError
from greedy.space import SpaceLp, lp_norm
from greedy.trace import CSV_COLUMNS, Trace

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_RENORM_TOL = 1e-6

PathLike = Union[str, Path]

_DICT_RE = re.compile(r"^GREEDYDICT\s+v1\s+n=(\d+)\s+p=([0-9.eE+-]+)\s+N=(\d+)\s*$")
_MAT_RE  = re.compile(r"^GREEDYMAT\s+v1\s+rows=(\d+)\s+cols=(\d+)\s*$")
_SIG_RE  = re.compile(r"^GREEDYSIG\s+v1\s+n=(\d+)\s*$")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _row(values) -> str:
    return " ".join(_fmt(v) for v in values)


def _read_lines(path: PathLike) -> List[str]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    lines = [ln.strip() for ln in path.read_text().splitlines()]
    return [ln for ln in lines if ln]


def _parse_rows(lines: List[str], count: int, width: int, what: str) -> np.ndarray:
    if len(lines) != count:
        raise FormatError(f"{what}: expected {count} data rows, found {len(lines)}")
    rows = []
    for i, line in enumerate(lines, start=1):
        try:
            values = [float(tok) for tok in line.split()]
        except ValueError as exc:
            raise FormatError(f"{what}: row {i} is not numeric ({exc})") from None
        if len(values) != width:
            raise FormatError(f"{what}: row {i} has {len(values)} values, expected {width}")
        rows.append(values)
    out = np.array(rows, dtype=float).reshape(count, width)
    if not np.all(np.isfinite(out)):
        raise FormatError(f"{what}: non-finite value")
    return out


# ---------------------------------------------------------------------------
# Dictionary
# ---------------------------------------------------------------------------

def write_dictionary(dictionary: Dictionary, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    space = dictionary.space
    lines = [f"GREEDYDICT v1 n={space.dim} p={_fmt(space.p)} N={dictionary.size}"]
    lines += [_row(g) for g in dictionary.elements]
    path.write_text("\n".join(lines) + "\n")
    logger.debug("wrote dictionary %s (%d × %d) to %s", dictionary.label, dictionary.size, space.dim, path)
    return path


def read_dictionary(path: PathLike, label: str = "") -> Dictionary:
    lines = _read_lines(path)
    if not lines:
        raise FormatError(f"{path}: empty file")
    match = _DICT_RE.match(lines[0])
    if match is None:
        raise FormatError(f"{path}: bad header {lines[0]!r}")
    n, p, count = int(match.group(1)), float(match.group(2)), int(match.group(3))
    try:
        space = SpaceLp(dim=n, p=p)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    rows = _parse_rows(lines[1:], count, n, str(path))
    norms = np.atleast_1d(lp_norm(rows, p, axis=1))
    deviation = np.abs(norms - 1.0)
    worst = int(np.argmax(deviation))
    if deviation[worst] > _RENORM_TOL:
        raise FormatError(f"{path}: element {worst} has norm {norms[worst]:.9g}, deviation above {_RENORM_TOL:g}")
    if np.any((norms < 1.0 - 1e-9) | (norms > 1.0 + 1e-12)):
        logger.info("%s: renormalizing elements (largest deviation %.3g)", path, deviation[worst])
        rows = rows / norms[:, None]
    return Dictionary(space=space, elements=rows, label=label or Path(path).stem)


# ---------------------------------------------------------------------------
# Matrix and signal
# ---------------------------------------------------------------------------

def write_matrix(matrix: np.ndarray, path: PathLike) -> Path:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ValueError("matrix must be 2-D")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"GREEDYMAT v1 rows={a.shape[0]} cols={a.shape[1]}"] + [_row(r) for r in a]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_matrix(path: PathLike) -> np.ndarray:
    lines = _read_lines(path)
    if not lines:
        raise FormatError(f"{path}: empty file")
    match = _MAT_RE.match(lines[0])
    if match is None:
        raise FormatError(f"{path}: bad header {lines[0]!r}")
    rows, cols = int(match.group(1)), int(match.group(2))
    return _parse_rows(lines[1:], rows, cols, str(path))


def write_signal(f: np.ndarray, path: PathLike) -> Path:
    x = np.asarray(f, dtype=float).ravel()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"GREEDYSIG v1 n={x.size}\n{_row(x)}\n")
    return path


def read_signal(path: PathLike) -> np.ndarray:
    lines = _read_lines(path)
    if not lines:
        raise FormatError(f"{path}: empty file")
    match = _SIG_RE.match(lines[0])
    if match is None:
        raise FormatError(f"{path}: bad header {lines[0]!r}")
    n = int(match.group(1))
    return _parse_rows(lines[1:], 1, n, str(path))[0]


# ---------------------------------------------------------------------------
# Trace CSV and report JSON
# ---------------------------------------------------------------------------

def write_trace_csv(trace: Trace, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
        writer.writeheader()
        writer.writerows(trace.to_rows())
    return path


def read_trace_csv(path: PathLike) -> List[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise FormatError(f"{path}: unexpected trace columns {reader.fieldnames}")
        return list(reader)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no inf / nan
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def report_json(payload: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(_jsonable(payload))
    return json.dumps(doc, indent=2, sort_keys=False)


def write_report_json(payload: dict, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_json(payload) + "\n")
    return path


def read_report_json(path: PathLike) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def rows_to_csv(rows: List[dict]) -> str:
    """Render a list of flat dicts as CSV text (thin-command stdout)."""
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_cell(v) for k, v in row.items()})
    return buf.getvalue().rstrip("\n")


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)
