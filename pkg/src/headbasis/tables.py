"""Frame-indexed CSV tables.

Every per-frame text file in the package (pose trajectories, audio feature
blocks, expression coefficients, landmarks) shares one layout: a header line
starting with ``frame``, then one record per frame with frame indices strictly
increasing from 0.  Floats are written with ``repr`` so a write/read round
trip is lossless.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError


def format_float(x: float) -> str:
    return repr(float(x))


def write_frame_table(path: str | Path, columns: Sequence[str], values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(columns):
        raise ValueError(f"expected {len(columns)} columns, got array of shape {values.shape}")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", *columns])
        for i, row in enumerate(values):
            writer.writerow([str(i), *(format_float(v) for v in row)])


def read_frame_table(
    path: str | Path, expected_columns: Sequence[str] | None = None
) -> tuple[list[str], np.ndarray]:
    """Read a frame table, returning ``(column names, (n, k) array)``.

    Frame indices must start at 0 and be strictly increasing.  When
    ``expected_columns`` is given the header must match it exactly.
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text") from exc
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "frame":
        raise ParseError(f"{path}: header must start with 'frame', got {rows[0]!r}")
    columns = header[1:]
    if expected_columns is not None and columns != list(expected_columns):
        raise ParseError(
            f"{path}: expected header {['frame', *expected_columns]!r}, got {header!r}"
        )
    data = []
    last = -1
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            idx = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        if (last < 0 and idx != 0) or (last >= 0 and idx <= last):
            raise ParseError(f"{path}:{lineno}: frame indices must increase strictly from 0")
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(f"{path}:{lineno}: non-finite value")
        last = idx
        data.append(vals)
    return columns, np.asarray(data, dtype=np.float64).reshape(len(data), len(columns))
