"""ASCII matrix and mask files.

Dense matrix: first line ``rows cols``, then ``rows*cols`` whitespace-separated
values in row-major order.  Mask: first line ``m n k``, then ``k`` lines
``i j`` with 0-based indices.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from altlin.linalg import IndexMask, as_matrix


def format_real(x: float) -> str:
    return "%.17g" % x


def write_matrix(path, a) -> None:
    a = as_matrix(a)
    m, n = a.shape
    lines = [f"{m} {n}"]
    lines.extend(" ".join(format_real(v) for v in row) for row in a)
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing 'rows cols' header")
    m, n = int(tokens[0]), int(tokens[1])
    if m <= 0 or n <= 0:
        raise ValueError(f"{path}: invalid shape {m}x{n}")
    values = tokens[2:]
    if len(values) != m * n:
        raise ValueError(f"{path}: expected {m * n} values, found {len(values)}")
    return as_matrix(np.array(values, dtype=np.float64).reshape(m, n))


def write_mask(path, mask: IndexMask) -> None:
    m, n = mask.shape
    lines = [f"{m} {n} {len(mask)}"]
    lines.extend(f"{i} {j}" for i, j in mask.entries)
    Path(path).write_text("\n".join(lines) + "\n")


def read_mask(path) -> IndexMask:
    rows = Path(path).read_text().split("\n")
    header = rows[0].split()
    if len(header) != 3:
        raise ValueError(f"{path}: header must be 'm n k'")
    m, n, k = (int(t) for t in header)
    body = [r.split() for r in rows[1:] if r.strip()]
    if len(body) != k:
        raise ValueError(f"{path}: expected {k} index lines, found {len(body)}")
    return IndexMask([(int(i), int(j)) for i, j in body], (m, n))
