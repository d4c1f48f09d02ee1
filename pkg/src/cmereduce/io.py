"""Matrix Market and CSV interchange.

Floats are written in shortest round-trip form, so reading a file back gives
the exact same doubles.
"""

from __future__ import annotations

import csv
import io
import sys
from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

__all__ = ["open_output", "write_matrix_market", "read_matrix_market", "write_csv", "read_csv", "fmt"]


def fmt(x) -> str:
    """Round-trip text for a number (integers stay integers)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@contextmanager
def open_output(path):
    """Text handle for ``path``; ``None`` or ``"-"`` means standard output."""
    if path is None or str(path) == "-":
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        yield fh


def write_matrix_market(path, matrix) -> None:
    """Coordinate, real, general, 1-based (scipy's writer)."""
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, sp.coo_matrix(matrix))
    with open_output(path) as fh:
        fh.write(buf.getvalue().decode("ascii"))


def read_matrix_market(path) -> sp.csc_matrix:
    return sp.csc_matrix(scipy.io.mmread(path))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open_output(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
