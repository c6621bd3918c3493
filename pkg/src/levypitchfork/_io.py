"""Plain CSV helpers with round-trip float formatting."""

from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, header, columns) -> Path:
    """Write equal-length columns under ``header`` with 17 significant digits."""
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Return (header, float array of shape (rows, cols))."""
    text = Path(path).read_text().strip().splitlines()
    header = text[0].split(",")
    if len(text) == 1:
        return header, np.empty((0, len(header)))
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    return header, data
