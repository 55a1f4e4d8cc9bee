"""Run-off triangles: storage, validation, conversions and CSV formats.

A triangle of side ``n + 1`` is held as an ``(n + 1, n + 1)`` float array in
which the observed cells ``i + j <= n`` carry claim amounts and the future
cells ``i + j > n`` are NaN.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .errors import (
    DuplicateCell,
    FutureCellPresent,
    IncompleteTriangle,
    KindMismatch,
    ParseError,
)

INCREMENTAL = "incremental"
CUMULATIVE = "cumulative"


@dataclass(frozen=True)
class CellIndex:
    origin: int
    dev: int

    def is_observed(self, n: int) -> bool:
        return self.origin + self.dev <= n


def observed_mask(n: int) -> np.ndarray:
    i, j = np.indices((n + 1, n + 1))
    return i + j <= n


@dataclass(frozen=True, eq=False)
class Triangle:
    """Square loss triangle.

    Parameters
    ----------
    values : ndarray, shape (n+1, n+1)
        Claim amounts; future cells must be NaN. The array is copied and
        made read-only.
    kind : {"incremental", "cumulative"}
    """

    values: np.ndarray
    kind: str = INCREMENTAL
    # increments a cumulative triangle was built from; keeps the round trip exact
    _increments: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise IncompleteTriangle(f"triangle must be a non-empty square grid, got shape {arr.shape}")
        if self.kind not in (INCREMENTAL, CUMULATIVE):
            raise KindMismatch(f"unknown triangle kind {self.kind!r}")
        n = arr.shape[0] - 1
        mask = observed_mask(n)
        if not np.all(np.isfinite(arr[mask])):
            raise IncompleteTriangle("every observed cell (i + j <= n) needs a finite value")
        if not np.all(np.isnan(arr[~mask])):
            raise FutureCellPresent("cells with i + j > n must be empty")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1

    @property
    def size(self) -> int:
        """Side length ``n + 1``."""
        return self.values.shape[0]

    @property
    def mask(self) -> np.ndarray:
        return observed_mask(self.n)

    def observed_cells(self) -> list[CellIndex]:
        n = self.n
        return [CellIndex(i, j) for i in range(n + 1) for j in range(n + 1 - i)]

    def observed_values(self) -> np.ndarray:
        """Observed values in origin-then-dev order (matches ``observed_cells``)."""
        idx = np.array([(c.origin, c.dev) for c in self.observed_cells()])
        return self.values[idx[:, 0], idx[:, 1]]

    def __getitem__(self, cell) -> float:
        i, j = (cell.origin, cell.dev) if isinstance(cell, CellIndex) else cell
        if i + j > self.n:
            raise KeyError(f"cell ({i}, {j}) is a future cell")
        return float(self.values[i, j])

    def __eq__(self, other):
        if not isinstance(other, Triangle):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.values, other.values, equal_nan=True)

    def __hash__(self):
        return hash((self.kind, self.values.tobytes()))

    def scaled(self, factor: float) -> "Triangle":
        return Triangle(self.values * factor, self.kind)

    # -- conversions -------------------------------------------------------

    def to_cumulative(self) -> "Triangle":
        if self.kind != INCREMENTAL:
            raise KindMismatch("to_cumulative needs an incremental triangle")
        out = np.full_like(self.values, np.nan)
        for i in range(self.size):
            row = self.values[i, : self.size - i]
            out[i, : self.size - i] = np.cumsum(row)
        return Triangle(out, CUMULATIVE, _increments=self.values)

    def to_incremental(self) -> "Triangle":
        if self.kind != CUMULATIVE:
            raise KindMismatch("to_incremental needs a cumulative triangle")
        if self._increments is not None:
            return Triangle(self._increments, INCREMENTAL)
        out = np.full_like(self.values, np.nan)
        for i in range(self.size):
            row = self.values[i, : self.size - i]
            out[i, : self.size - i] = np.diff(row, prepend=0.0)
        return Triangle(out, INCREMENTAL)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[float]], kind: str = INCREMENTAL) -> "Triangle":
        """Build from ragged rows: row ``i`` holds the ``n + 1 - i`` observed values."""
        rows = [list(map(float, r)) for r in rows]
        size = len(rows)
        arr = np.full((size, size), np.nan)
        for i, r in enumerate(rows):
            if len(r) != size - i:
                raise IncompleteTriangle(f"row {i} has {len(r)} values, expected {size - i}")
            arr[i, : len(r)] = r
        return cls(arr, kind)

    @classmethod
    def from_cells(cls, cells: dict[tuple[int, int], float]) -> "Triangle":
        if not cells:
            raise IncompleteTriangle("no cells given")
        n = max(max(i, j) for i, j in cells)
        for i, j in cells:
            if i + j > n:
                raise FutureCellPresent(f"value given for future cell ({i}, {j})")
        arr = np.full((n + 1, n + 1), np.nan)
        for (i, j), v in cells.items():
            arr[i, j] = v
        missing = [(i, j) for i in range(n + 1) for j in range(n + 1 - i) if (i, j) not in cells]
        if missing:
            raise IncompleteTriangle(f"missing observed cells: {missing[:5]}{' ...' if len(missing) > 5 else ''}")
        return cls(arr, INCREMENTAL)


def future_cells(t: Triangle) -> list[CellIndex]:
    """Cells with ``i + j > n`` ordered by origin, then development year."""
    n = t.n
    return [CellIndex(i, j) for i in range(n + 1) for j in range(n + 1) if i + j > n]


# -- CSV formats ------------------------------------------------------------


def _number(token: str, where: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric value {token!r} at {where}") from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {token!r} at {where}")
    return value


def _index(token: str, where: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"bad index {token!r} at {where}") from None
    if value < 0:
        raise ParseError(f"negative index {value} at {where}")
    return value


def _parse_long(reader) -> Triangle:
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["origin", "dev", "value"]:
        raise ParseError(f"long CSV header must be 'origin,dev,value', got {header!r}")
    cells: dict[tuple[int, int], float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != 3:
            raise ParseError(f"line {lineno}: expected 3 fields, got {len(row)}")
        where = f"line {lineno}"
        key = (_index(row[0].strip(), where), _index(row[1].strip(), where))
        if key in cells:
            raise DuplicateCell(f"cell {key} appears twice (line {lineno})")
        cells[key] = _number(row[2].strip(), where)
    return Triangle.from_cells(cells)


def _parse_wide(reader) -> Triangle:
    header = next(reader, None)
    if header is None:
        raise ParseError("empty wide CSV")
    header = [h.strip() for h in header]
    size = len(header) - 1
    if header[0] != "origin" or header[1:] != [f"d{j}" for j in range(size)]:
        raise ParseError(f"wide CSV header must be 'origin,d0,...,dn', got {header!r}")
    cells: dict[tuple[int, int], float] = {}
    origins = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != size + 1:
            raise ParseError(f"line {lineno}: expected {size + 1} fields, got {len(row)}")
        i = _index(row[0].strip(), f"line {lineno}")
        if i in origins:
            raise DuplicateCell(f"origin {i} appears twice (line {lineno})")
        origins.add(i)
        for j, tok in enumerate(row[1:]):
            tok = tok.strip()
            if tok:
                cells[(i, j)] = _number(tok, f"line {lineno}, d{j}")
    n = size - 1
    for i, j in cells:
        if i + j > n:
            raise FutureCellPresent(f"value given for future cell ({i}, {j})")
    missing = [(i, j) for i in range(n + 1) for j in range(n + 1 - i) if (i, j) not in cells]
    if missing:
        raise IncompleteTriangle(f"missing observed cells: {missing[:5]}")
    return Triangle.from_cells(cells)


def parse_triangle(source: str | TextIO, format: str = "long") -> Triangle:
    """Read an incremental triangle from CSV text or an open text stream.

    ``format`` is ``"long"`` (``origin,dev,value``) or ``"wide"``
    (``origin,d0,...,dn`` with empty future cells).
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    fmt = format.lower().removesuffix("-csv")
    if fmt == "long":
        return _parse_long(reader)
    if fmt == "wide":
        return _parse_wide(reader)
    raise ValueError(f"unknown triangle format {format!r}")


def read_triangle(path, format: str | None = None) -> Triangle:
    """Read a triangle file; the format is sniffed from the header when not given."""
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    if format is None:
        first = text.lstrip("﻿").split("\n", 1)[0]
        format = "wide" if ",d0" in first.replace(" ", "") else "long"
    return parse_triangle(text.lstrip("﻿"), format)


def format_value(x: float) -> str:
    """Shortest text that parses back to exactly ``x``."""
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def to_long_csv(t: Triangle) -> str:
    """Canonical long CSV (origin-then-dev order, ``\\n`` line endings)."""
    lines = ["origin,dev,value"]
    for c in t.observed_cells():
        lines.append(f"{c.origin},{c.dev},{format_value(t.values[c.origin, c.dev])}")
    return "\n".join(lines) + "\n"


def to_wide_csv(t: Triangle) -> str:
    lines = ["origin," + ",".join(f"d{j}" for j in range(t.size))]
    for i in range(t.size):
        fields = [format_value(t.values[i, j]) if i + j <= t.n else "" for j in range(t.size)]
        lines.append(f"{i}," + ",".join(fields))
    return "\n".join(lines) + "\n"
