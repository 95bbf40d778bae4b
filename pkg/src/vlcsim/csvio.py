"""CSV emission with round-trip-exact float formatting."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def write_table(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_table(path):
    """Header and rows; cells parse as int when written as int, else float."""
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    rows = [[_parse(c) for c in line.split(",")] for line in lines[1:]]
    return header, rows


def _parse(cell: str):
    try:
        return int(cell)
    except ValueError:
        return float(cell)


def write_matrix(path, x, y, values) -> Path:
    """One row per grid y; the first column holds y, the header holds x."""
    header = ["y_m"] + [fmt(float(v)) for v in x]
    rows = [[float(yv)] + [float(c) for c in row] for yv, row in zip(y, np.asarray(values))]
    return write_table(path, header, rows)


def read_matrix(path):
    header, rows = read_table(path)
    x = np.array([float(h) for h in header[1:]])
    arr = np.array(rows, dtype=float)
    return x, arr[:, 0], arr[:, 1:]
