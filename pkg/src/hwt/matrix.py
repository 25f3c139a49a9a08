"""Real-valued data matrices and their CSV form.

A :class:`DataMatrix` is an n x m table of finite reals with row and column
labels.  It is the input and output type of the transform pipeline.  CSV
convention: first row holds column ids; an optional first column holds row
ids (detected by an empty leading header cell or by data rows one field
longer than the header).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ParseError

__all__ = ["DataMatrix", "read_csv", "write_csv"]


@dataclass(frozen=True)
class DataMatrix:
    """n observations by m features, every value finite."""

    values: np.ndarray
    row_ids: tuple = field(default=None)
    col_ids: tuple = field(default=None)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 2:
            raise InvalidInputError(f"expected a 2-d array, got shape {v.shape}")
        n, m = v.shape
        if n < 1 or m < 1:
            raise InvalidInputError(f"matrix must be at least 1x1, got {n}x{m}")
        if not np.isfinite(v).all():
            bad = np.argwhere(~np.isfinite(v))[0]
            raise InvalidInputError(
                f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}"
            )
        object.__setattr__(self, "values", v)
        rid = self.row_ids if self.row_ids is not None else [str(i + 1) for i in range(n)]
        cid = self.col_ids if self.col_ids is not None else [f"c{j + 1}" for j in range(m)]
        rid, cid = tuple(str(r) for r in rid), tuple(str(c) for c in cid)
        if len(rid) != n:
            raise InvalidInputError(f"{len(rid)} row ids for {n} rows")
        if len(cid) != m:
            raise InvalidInputError(f"{len(cid)} column ids for {m} columns")
        object.__setattr__(self, "row_ids", rid)
        object.__setattr__(self, "col_ids", cid)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def with_values(self, values) -> "DataMatrix":
        """Same labels, new values (shape must match)."""
        v = np.asarray(values, dtype=float)
        if v.shape != self.values.shape:
            raise InvalidInputError(f"shape {v.shape} != {self.values.shape}")
        return DataMatrix(v, self.row_ids, self.col_ids)


def write_csv(x: DataMatrix, path_or_file) -> None:
    """Write a DataMatrix as CSV with a leading row-id column."""
    if hasattr(path_or_file, "write"):
        _write_csv(x, path_or_file)
    else:
        with open(path_or_file, "w", newline="") as f:
            _write_csv(x, f)


def _write_csv(x, f):
    w = csv.writer(f, lineterminator="\n")
    w.writerow([""] + list(x.col_ids))
    for rid, row in zip(x.row_ids, x.values):
        w.writerow([rid] + [repr(float(v)) for v in row])


def read_csv(path_or_file) -> DataMatrix:
    """Parse a DataMatrix from CSV (row-id column optional)."""
    if hasattr(path_or_file, "read"):
        return _read_csv(path_or_file)
    with open(path_or_file, newline="") as f:
        return _read_csv(f)


def _read_csv(f):
    rows = [r for r in csv.reader(f) if r and any(field.strip() for field in r)]
    if len(rows) < 2:
        raise ParseError("need a header row and at least one data row")
    header, data = rows[0], rows[1:]
    has_row_ids = header[0].strip() == "" or len(data[0]) == len(header) + 1
    col_ids = [h.strip() for h in (header[1:] if header[0].strip() == "" else header)]
    if len(data[0]) == len(col_ids) + 1:
        has_row_ids = True
    row_ids, values = [], []
    for i, r in enumerate(data, start=2):
        fields = [s.strip() for s in r]
        if has_row_ids:
            rid, fields = fields[0], fields[1:]
        else:
            rid = str(i - 1)
        if len(fields) != len(col_ids):
            raise ParseError(
                f"expected {len(col_ids)} values, got {len(fields)}", line=i
            )
        parsed = []
        for j, s in enumerate(fields):
            try:
                parsed.append(float(s))
            except ValueError:
                raise ParseError(f"field {j + 2}: not a number: {s!r}", line=i) from None
        row_ids.append(rid)
        values.append(parsed)
    return DataMatrix(np.array(values, dtype=float), row_ids, col_ids)


def csv_text(x: DataMatrix) -> str:
    buf = io.StringIO()
    _write_csv(x, buf)
    return buf.getvalue()
