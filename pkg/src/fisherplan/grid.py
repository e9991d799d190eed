"""Grid-world domain model: regions, snapshots, data matrices and their files.

Cells are addressed by their row-major index over the full ``rows x cols``
grid.  Only valid cells take part in modelling; they are additionally given a
dense *compact* index ``0..L-1`` (also row-major) which is the column index of
the spatial factor ``Y`` and of a :class:`DataMatrix`.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, FormatError, InvalidCellError

# 8-connected neighbourhood, row-major ordered so results come out sorted.
_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Region:
    """A rectangular grid with a validity mask.

    Parameters
    ----------
    rows, cols : int
        Grid size.
    valid : array_like of bool, optional
        Flat (row-major) or ``(rows, cols)`` mask of cells that belong to the
        region. Defaults to every cell being valid.
    """

    rows: int
    cols: int
    valid: np.ndarray = None
    _compact: np.ndarray = field(init=False, repr=False)
    _cells: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.rows) < 1 or int(self.cols) < 1:
            raise DataError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        n = self.rows * self.cols
        if self.valid is None:
            valid = np.ones(n, dtype=bool)
        else:
            valid = np.asarray(self.valid, dtype=bool).reshape(-1)
            if valid.size != n:
                raise DataError(f"validity mask has {valid.size} entries, expected {n}")
        if not valid.any():
            raise DataError("region has no valid cells")
        cells = np.flatnonzero(valid)
        compact = np.full(n, -1, dtype=np.int64)
        compact[cells] = np.arange(cells.size)
        object.__setattr__(self, "valid", _frozen(valid))
        object.__setattr__(self, "_cells", _frozen(cells))
        object.__setattr__(self, "_compact", _frozen(compact))

    @classmethod
    def full(cls, rows: int, cols: int) -> "Region":
        return cls(rows, cols)

    @property
    def size(self) -> int:
        """Number of grid cells, valid or not."""
        return self.rows * self.cols

    @property
    def L(self) -> int:
        """Number of valid cells."""
        return int(self._cells.size)

    @property
    def cells(self) -> np.ndarray:
        """Grid indices of the valid cells in ascending order."""
        return self._cells

    def check(self, cell: int) -> int:
        """Return ``cell`` as int, raising if it is out of range."""
        c = int(cell)
        if not 0 <= c < self.size:
            raise InvalidCellError(f"cell {c} outside grid of {self.size} cells")
        return c

    def check_valid(self, cell: int) -> int:
        c = self.check(cell)
        if not self.valid[c]:
            raise InvalidCellError(f"cell {c} ({c // self.cols},{c % self.cols}) is not part of the region")
        return c

    def is_valid(self, cell: int) -> bool:
        return 0 <= cell < self.size and bool(self.valid[cell])

    def compact(self, cells) -> np.ndarray | int:
        """Map grid indices of valid cells to compact column indices."""
        if np.ndim(cells) == 0:
            return int(self._compact[self.check_valid(cells)])
        idx = np.asarray(cells, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.size):
            raise InvalidCellError("cell index outside grid")
        out = self._compact[idx]
        if idx.size and out.min() < 0:
            bad = int(idx[np.argmin(out)])
            raise InvalidCellError(f"cell {bad} is not part of the region")
        return out

    def expand(self, compact) -> np.ndarray | int:
        """Inverse of :meth:`compact`."""
        if np.ndim(compact) == 0:
            return int(self._cells[int(compact)])
        return self._cells[np.asarray(compact, dtype=np.int64)]

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise InvalidCellError(f"({row},{col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def coords(self, cells=None) -> np.ndarray:
        """``(n, 2)`` integer array of (row, col) for ``cells`` (default: valid cells)."""
        idx = self._cells if cells is None else np.asarray(cells, dtype=np.int64)
        return np.stack([idx // self.cols, idx % self.cols], axis=-1)

    def __eq__(self, other):
        if not isinstance(other, Region):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and np.array_equal(self.valid, other.valid)

    def __hash__(self):
        return hash((self.rows, self.cols, self.valid.tobytes()))


def cell_coords(region: Region, cell: int) -> tuple[int, int]:
    c = region.check(cell)
    return divmod(c, region.cols)


def euclidean(region: Region, a: int, b: int) -> float:
    """Distance between two cell centres in cell-width units."""
    ra, ca = cell_coords(region, a)
    rb, cb = cell_coords(region, b)
    return math.sqrt((ra - rb) ** 2 + (ca - cb) ** 2)


def neighbors(region: Region, cell: int) -> list[int]:
    """8-connected valid neighbours of ``cell`` in ascending index order."""
    c = region.check_valid(cell)
    r, col = divmod(c, region.cols)
    out = []
    for dr, dc in _OFFSETS:
        rr, cc = r + dr, col + dc
        if 0 <= rr < region.rows and 0 <= cc < region.cols:
            j = rr * region.cols + cc
            if region.valid[j]:
                out.append(j)
    return out


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Values of the field at one time over the valid cells of ``region``.

    ``values`` is indexed by compact cell index; NaN marks a missing value.
    """

    region: Region
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.region.L:
            raise DataError(f"snapshot has {v.size} values, region has {self.region.L} valid cells")
        if np.isinf(v).any():
            raise DataError("snapshot values must be finite or missing")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def value_at(self, cell: int) -> float:
        """Value at grid cell ``cell`` (NaN when missing)."""
        return float(self.values[self.region.compact(cell)])

    def grid(self) -> np.ndarray:
        """Full ``(rows, cols)`` array with NaN at missing and invalid cells."""
        g = np.full(self.region.size, np.nan)
        g[self.region.cells] = self.values
        return g.reshape(self.region.rows, self.region.cols)

    def __eq__(self, other):
        if not isinstance(other, Snapshot):
            return NotImplemented
        return self.region == other.region and np.array_equal(self.values, other.values, equal_nan=True)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """``T x L`` matrix of prior observations with its observation mask."""

    values: np.ndarray
    mask: np.ndarray
    region: Region | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = np.asarray(self.mask, dtype=bool)
        if v.ndim != 2 or v.shape != m.shape:
            raise DataError(f"values {v.shape} and mask {m.shape} must be equal 2-D shapes")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise DataError("data matrix must be non-empty")
        if not np.isfinite(v[m]).all():
            raise DataError("observed entries must be finite")
        if self.region is not None and self.region.L != v.shape[1]:
            raise DataError("column count does not match region")
        # Unobserved entries are zeroed so nothing downstream can trip on NaN.
        v = np.where(m, v, 0.0)
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "mask", _frozen(m))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, a, region: Region | None = None) -> "DataMatrix":
        """Build from an array where NaN marks unobserved entries."""
        a = np.asarray(a, dtype=float)
        return cls(a, ~np.isnan(a), region)

    def row(self, t: int) -> Snapshot:
        region = self.region or Region(1, self.L)
        return Snapshot(region, np.where(self.mask[t], self.values[t], np.nan))


def stack_to_matrix(snapshots: Sequence[Snapshot]) -> DataMatrix:
    if not snapshots:
        raise DataError("cannot stack an empty list of snapshots")
    region = snapshots[0].region
    for t, s in enumerate(snapshots):
        if s.region != region:
            raise DataError(f"snapshot {t} belongs to a different region")
    vals = np.vstack([s.values for s in snapshots])
    mask = ~np.isnan(vals)
    return DataMatrix(np.where(mask, vals, 0.0), mask, region)


# ---------------------------------------------------------------- file formats

def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def store_region(region: Region, path) -> None:
    lines = [f"{region.rows} {region.cols}"]
    v = region.valid.reshape(region.rows, region.cols)
    lines += [" ".join("1" if f else "0" for f in row) for row in v]
    Path(path).write_text("\n".join(lines) + "\n")


def load_region(path) -> Region:
    text = Path(path).read_text().splitlines()
    lines = [ln.strip() for ln in text if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty region manifest")
    head = lines[0].split()
    try:
        rows, cols = (int(h) for h in head)
    except ValueError:
        raise FormatError(f"{path}: line 1: expected 'rows cols', got {lines[0]!r}") from None
    flags = lines[1:]
    if len(flags) != rows:
        raise FormatError(f"{path}: expected {rows} flag lines, found {len(flags)}")
    valid = []
    for i, ln in enumerate(flags, start=2):
        toks = ln.split() if " " in ln else list(ln)
        if len(toks) != cols or any(t not in ("0", "1") for t in toks):
            raise FormatError(f"{path}: line {i}: expected {cols} flags of 0/1")
        valid.extend(t == "1" for t in toks)
    try:
        return Region(rows, cols, valid)
    except DataError as e:
        raise FormatError(f"{path}: {e}") from None


def store_snapshot(snapshot: Snapshot, path) -> None:
    g = snapshot.grid()
    with open(path, "w") as f:
        for row in g:
            f.write(",".join(_fmt(x) for x in row) + "\n")


def load_snapshot(path, region: Region) -> Snapshot:
    """Read a snapshot CSV laid out over the full grid of ``region``."""
    with open(path) as f:
        lines = f.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) != region.rows:
        raise FormatError(f"{path}: expected {region.rows} rows, found {len(lines)}")
    g = np.empty((region.rows, region.cols))
    for i, ln in enumerate(lines):
        toks = ln.split(",")
        if len(toks) != region.cols:
            raise FormatError(f"{path}: row {i + 1}: expected {region.cols} fields, found {len(toks)}")
        for j, tok in enumerate(toks):
            tok = tok.strip()
            if tok == "nan":
                g[i, j] = np.nan
                continue
            try:
                x = float(tok)
            except ValueError:
                x = math.nan
            if not math.isfinite(x):
                raise FormatError(f"{path}: row {i + 1}, col {j + 1}: bad value {tok!r}")
            if not region.valid[i * region.cols + j]:
                raise FormatError(f"{path}: row {i + 1}, col {j + 1}: value given for a cell outside the region")
            g[i, j] = x
    return Snapshot(region, g.reshape(-1)[region.cells])


def store_stack(paths: Iterable, manifest) -> None:
    Path(manifest).write_text("".join(f"{os.fspath(p)}\n" for p in paths))


def read_stack_manifest(manifest) -> list[Path]:
    """Snapshot paths listed in ``manifest``; relative entries resolve against its directory."""
    base = Path(manifest).parent
    out = []
    for ln in Path(manifest).read_text().splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        p = Path(ln)
        out.append(p if p.is_absolute() else base / p)
    if not out:
        raise FormatError(f"{manifest}: no snapshot paths listed")
    return out


def load_stack(manifest, region: Region) -> list[Snapshot]:
    return [load_snapshot(p, region) for p in read_stack_manifest(manifest)]
