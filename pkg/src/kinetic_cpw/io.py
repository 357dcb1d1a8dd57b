"""File formats: S21 trace CSV, plot tables and JSON reports.

Floats are written with ``repr`` (shortest string that parses back to the
same double).  Every write goes to a temporary file in the target directory
and is then renamed over the destination.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError
from .fit.resonance import S21Trace

TRACE_HEADER = ("freq_hz", "re_s21", "im_s21")
TRACE_POWER_COLUMN = "power_dbm"


def fmt_float(x) -> str:
    return repr(float(x))


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_trace(path, trace: S21Trace) -> Path:
    buf = io.StringIO()
    header = list(TRACE_HEADER)
    if trace.power_dbm is not None:
        header.append(TRACE_POWER_COLUMN)
    buf.write(",".join(header) + "\n")
    extra = [] if trace.power_dbm is None else [fmt_float(trace.power_dbm)]
    for f, z in zip(trace.freq, trace.s21):
        buf.write(",".join([fmt_float(f), fmt_float(z.real), fmt_float(z.imag)] + extra) + "\n")
    return atomic_write_text(path, buf.getvalue())


def read_trace(path) -> S21Trace:
    """Parse a trace CSV; rows must already be in strictly increasing frequency."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read trace {path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty trace file", line=1)
    header = tuple(h.strip() for h in lines[0].split(","))
    has_power = header == TRACE_HEADER + (TRACE_POWER_COLUMN,)
    if header != TRACE_HEADER and not has_power:
        raise DataError(f"{path}: header must be {','.join(TRACE_HEADER)}[,{TRACE_POWER_COLUMN}], got {lines[0]!r}", line=1)
    ncol = len(header)
    freq, s21, power = [], [], None
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cells = raw.split(",")
        if len(cells) != ncol:
            raise DataError(f"{path}: expected {ncol} columns, got {len(cells)}", line=lineno)
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise DataError(f"{path}: malformed number ({exc})", line=lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"{path}: non-finite value", line=lineno)
        if freq and values[0] <= freq[-1]:
            raise DataError(f"{path}: frequency {values[0]!r} does not increase", line=lineno)
        if has_power:
            if power is None:
                power = values[3]
            elif values[3] != power:
                raise DataError(f"{path}: {TRACE_POWER_COLUMN} must be constant within a file", line=lineno)
        freq.append(values[0])
        s21.append(complex(values[1], values[2]))
    return S21Trace(np.array(freq), np.array(s21, dtype=complex), power)


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """CSV table with a header naming each column (and its unit)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_table(path):
    """Read a table written by :func:`write_table` into a dict of float arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty table", line=1) from None
        cols = {h: [] for h in header}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: expected {len(header)} columns", line=lineno)
            for h, cell in zip(header, row):
                try:
                    cols[h].append(float(cell))
                except ValueError:
                    raise DataError(f"{path}: malformed number {cell!r} in column {h}", line=lineno) from None
    return {h: np.array(v) for h, v in cols.items()}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps_json(obj))
