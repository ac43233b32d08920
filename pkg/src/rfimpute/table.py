"""Mixed-type tabular data with an explicit missingness mask.

A :class:`MixedTable` holds numeric and factor columns of equal length.
Every cell is either an observed value or missing; numeric storage uses
NaN and factor storage uses code -1 at masked positions, but the boolean
mask is the authoritative record of missingness.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataError, InsufficientColumnsError, ParseError

NUMERIC = "numeric"
FACTOR = "factor"

#: tokens treated as missing on CSV ingest
MISSING_TOKENS = ("", "NA")


class Column:
    """One named column: numeric values or factor codes plus a missing mask."""

    def __init__(self, name, kind, values, mask, levels=None):
        self.name = str(name)
        if kind not in (NUMERIC, FACTOR):
            raise ValueError(f"unknown column kind {kind!r}")
        self.kind = kind
        mask = np.asarray(mask, dtype=bool).copy()
        if kind == NUMERIC:
            vals = np.asarray(values, dtype=np.float64).copy()
            # NaN supplied as a value means missing
            mask |= np.isnan(vals)
            vals[mask] = np.nan
            if np.any(~np.isfinite(vals[~mask])):
                raise ValueError(f"column {name!r} has non-finite observed values")
            self.levels = None
        else:
            vals = np.asarray(values, dtype=np.int32).copy()
            self.levels = tuple(str(level) for level in (levels or ()))
            if len(set(self.levels)) != len(self.levels):
                raise ValueError(f"column {name!r} has duplicate levels")
            mask |= vals < 0
            vals[mask] = -1
            observed = vals[~mask]
            if observed.size and observed.max(initial=-1) >= len(self.levels):
                raise ValueError(f"column {name!r} has codes outside its levels")
        if vals.shape != mask.shape or vals.ndim != 1:
            raise ValueError("values and mask must be equal-length vectors")
        self.values = vals
        self.mask = mask

    def __len__(self):
        return len(self.values)

    @property
    def n_missing(self):
        return int(self.mask.sum())

    def observed(self):
        """Observed values (numeric floats or factor codes)."""
        return self.values[~self.mask]

    def copy(self):
        return Column(self.name, self.kind, self.values, self.mask, self.levels)

    def cell_str(self, i):
        """The cell's string form as written to CSV ('NA' when missing)."""
        if self.mask[i]:
            return "NA"
        if self.kind == NUMERIC:
            return repr(float(self.values[i]))
        return self.levels[int(self.values[i])]

    def equals(self, other):
        """Logical equality: same name, kind, mask, and cell values.

        Factor columns compare by level string, not by code, so tables
        that round-trip through CSV with re-derived level dictionaries
        still compare equal.
        """
        if self.name != other.name or self.kind != other.kind:
            return False
        if not np.array_equal(self.mask, other.mask):
            return False
        obs = ~self.mask
        if self.kind == NUMERIC:
            return np.array_equal(self.values[obs], other.values[obs])
        mine = [self.levels[c] for c in self.values[obs]]
        theirs = [other.levels[c] for c in other.values[obs]]
        return mine == theirs


class MixedTable:
    """An ordered collection of equal-length :class:`Column` objects."""

    def __init__(self, columns, provenance=None):
        columns = list(columns)
        if not columns:
            raise EmptyDataError("a table needs at least one column")
        n = len(columns[0])
        for col in columns:
            if len(col) != n:
                raise ValueError("columns have unequal lengths")
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")
        self.columns = columns
        self.n_rows = n
        self.provenance = provenance

    @property
    def n_cols(self):
        return len(self.columns)

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def column_names(self):
        return [c.name for c in self.columns]

    def column(self, name):
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def column_index(self, name):
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)

    def copy(self):
        return MixedTable([c.copy() for c in self.columns], self.provenance)

    def missing_mask(self):
        """n_rows x n_cols boolean matrix, True at missing cells."""
        return np.column_stack([c.mask for c in self.columns])

    def n_missing(self):
        return int(sum(c.n_missing for c in self.columns))

    def is_complete(self):
        return self.n_missing() == 0

    def equals(self, other):
        if self.shape != other.shape:
            return False
        return all(a.equals(b) for a, b in zip(self.columns, other.columns))

    def to_matrix(self):
        """Encode as a float matrix for the forest kernels.

        Numeric columns keep their values; factor columns are encoded as
        float level codes. Missing cells become NaN in both cases.
        Returns ``(X, kinds, n_levels)`` where ``kinds[j]`` is 0 for
        numeric and 1 for factor, and ``n_levels[j]`` is the declared
        level count (0 for numeric columns).
        """
        n, p = self.shape
        X = np.empty((n, p), dtype=np.float64)
        kinds = np.zeros(p, dtype=np.int8)
        n_levels = np.zeros(p, dtype=np.int32)
        for j, col in enumerate(self.columns):
            vals = col.values.astype(np.float64)
            vals[col.mask] = np.nan
            X[:, j] = vals
            if col.kind == FACTOR:
                kinds[j] = 1
                n_levels[j] = len(col.levels)
        return X, kinds, n_levels

    def with_matrix(self, X):
        """A copy of this table with cell values replaced from a float matrix.

        NaN entries in ``X`` stay missing; everything else becomes an
        observed value (factor entries are rounded to level codes).
        """
        cols = []
        for j, col in enumerate(self.columns):
            vec = np.asarray(X[:, j], dtype=np.float64)
            mask = np.isnan(vec)
            if col.kind == NUMERIC:
                cols.append(Column(col.name, NUMERIC, vec, mask))
            else:
                codes = np.where(mask, -1, np.rint(np.nan_to_num(vec))).astype(np.int32)
                cols.append(Column(col.name, FACTOR, codes, mask, col.levels))
        return MixedTable(cols, self.provenance)


@dataclass
class DatasetStats:
    """Summary statistics of a table: correlation, information, complexity."""

    rho: float | None
    info: float
    complexity: float


def _parse_numeric_cell(text):
    try:
        v = float(text)
    except ValueError:
        return None
    if math.isnan(v):
        return None
    return v


def _build_column(name, cells, kind=None):
    miss = np.array([c in MISSING_TOKENS for c in cells], dtype=bool)
    observed = [c for c, m in zip(cells, miss) if not m]
    if kind is None:
        parsed = [_parse_numeric_cell(c) for c in observed]
        kind = NUMERIC if observed and all(v is not None for v in parsed) else FACTOR
        if not observed:
            kind = NUMERIC
    if kind == NUMERIC:
        vals = np.full(len(cells), np.nan)
        for i, (c, m) in enumerate(zip(cells, miss)):
            if m:
                continue
            v = _parse_numeric_cell(c)
            if v is None:
                raise ParseError(
                    f"column {name!r} is numeric but cell {c!r} does not parse", row=i
                )
            vals[i] = v
        return Column(name, NUMERIC, vals, miss)
    levels = []
    seen = {}
    codes = np.full(len(cells), -1, dtype=np.int32)
    for i, (c, m) in enumerate(zip(cells, miss)):
        if m:
            continue
        if c not in seen:
            seen[c] = len(levels)
            levels.append(c)
        codes[i] = seen[c]
    return Column(name, FACTOR, codes, miss, levels)


def read_csv(path, schema=None):
    """Read a comma-delimited file into a :class:`MixedTable`.

    The first row is the header. Empty cells and the literal token "NA"
    are missing. Columns where every observed cell parses as a number
    become numeric; anything else becomes a factor with levels in order
    of first appearance. ``schema`` maps column names to "numeric" or
    "factor" to override the auto-typing.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataError(f"{path} is empty") from None
        if not header or all(h == "" for h in header):
            raise EmptyDataError(f"{path} has no columns")
        rows = []
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise ParseError(
                    f"row {i + 1} has {len(row)} cells, expected {len(header)}", row=i + 1
                )
            rows.append(row)
    schema = dict(schema or {})
    unknown = set(schema) - set(header)
    if unknown:
        raise ParseError(f"schema names unknown columns: {sorted(unknown)}")
    cols = []
    for j, name in enumerate(header):
        cells = [r[j] for r in rows]
        cols.append(_build_column(name, cells, kind=schema.get(name)))
    return MixedTable(cols, provenance=str(path))


def write_csv(table, path):
    """Write a table as CSV; missing cells become the literal "NA".

    Numeric cells use ``repr`` so a read-back reproduces the exact
    float. ``read_csv(write_csv(t))`` equals ``t`` under
    :meth:`MixedTable.equals`.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.column_names())
        for i in range(table.n_rows):
            writer.writerow([c.cell_str(i) for c in table.columns])


def read_schema_file(path):
    """Parse a plain-text schema override file of ``name=numeric|factor`` lines."""
    schema = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"schema line {lineno}: expected name=kind", row=lineno)
            name, kind = line.split("=", 1)
            kind = kind.strip().lower()
            if kind not in (NUMERIC, FACTOR):
                raise ParseError(f"schema line {lineno}: unknown kind {kind!r}", row=lineno)
            schema[name.strip()] = kind
    return schema


def _pairwise_pearson(a, b, a_mask, b_mask):
    """Pearson correlation over rows observed in both columns, or None."""
    both = ~(a_mask | b_mask)
    if both.sum() < 2:
        return None
    x = a[both]
    y = b[both]
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        return None
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


def correlation_rho(table):
    """Aggregate off-diagonal correlation of the numeric columns.

    Computed as ``C(p',2)^-1 * sum_j sqrt(sum_{k<j} r_kj^2)`` over the
    eligible numeric columns in table order, where ``r_kj`` is the
    pairwise Pearson correlation over rows observed in both columns.
    Zero-variance numeric columns are dropped with a warning; undefined
    pairwise correlations contribute zero.
    """
    eligible = []
    for col in table.columns:
        if col.kind != NUMERIC:
            continue
        obs = col.observed()
        if obs.size >= 2 and obs.std() > 0.0:
            eligible.append(col)
        else:
            warnings.warn(
                f"column {col.name!r} excluded from correlation (constant or too few values)",
                stacklevel=2,
            )
    p = len(eligible)
    if p < 2:
        raise InsufficientColumnsError(
            f"correlation needs >= 2 eligible numeric columns, found {p}"
        )
    total = 0.0
    for j in range(p):
        ssq = 0.0
        for k in range(j):
            r = _pairwise_pearson(
                eligible[k].values,
                eligible[j].values,
                eligible[k].mask,
                eligible[j].mask,
            )
            if r is not None:
                ssq += r * r
        total += math.sqrt(ssq)
    return total / math.comb(p, 2)


def dataset_stats(table):
    """Correlation, log-information log10(n/p), and log-complexity log10(n*p)."""
    n, p = table.shape
    try:
        rho = correlation_rho(table)
    except InsufficientColumnsError:
        rho = None
    return DatasetStats(rho=rho, info=math.log10(n / p), complexity=math.log10(n * p))
