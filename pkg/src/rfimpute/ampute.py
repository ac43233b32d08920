"""Induce MCAR, MAR, or NMAR missingness into a complete table.

Each inducer consumes a complete table and a target fraction gamma,
returning the amputed table plus the indicator mask of the cells it
blanked. MCAR blanks cells uniformly across the flattened matrix; MAR
blanks each column's cells according to the tail behavior of a randomly
chosen donor column; NMAR uses each column's own tails. Tail weights
follow the logistic curve F(x) = 1 / (1 + exp(-3x)) applied to
standardized values, with the upper or lower tail favored by a fair
coin per column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MechanismError, NoCellsError
from .table import NUMERIC

MECHANISMS = ("mcar", "mar", "nmar")


@dataclass
class MissingnessSpec:
    mechanism: str
    gamma: float
    seed: int = 0

    def __post_init__(self):
        self.mechanism = self.mechanism.lower()
        if self.mechanism not in MECHANISMS:
            raise MechanismError(f"unknown mechanism {self.mechanism!r}")
        if not 0.0 < self.gamma < 1.0:
            raise MechanismError("gamma must lie strictly inside (0, 1)")


@dataclass
class InducedMask:
    """Indicator matrix of artificially blanked cells."""

    indicator: np.ndarray
    column_names: list

    @property
    def per_column_counts(self):
        return self.indicator.sum(axis=0)

    @property
    def n_cells(self):
        return int(self.indicator.sum())

    def save_csv(self, path):
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.column_names)
            for row in self.indicator.astype(int):
                writer.writerow(row.tolist())


def logistic_tail(x):
    """F(x) = (1 + exp(-3x))^-1, the tail-weight curve."""
    return 1.0 / (1.0 + np.exp(-3.0 * np.asarray(x, dtype=float)))


def standardized_values(col):
    """Column values standardized to mean 0, SD 1 (factors by level code).

    A constant column standardizes to all zeros, which makes the tail
    weights uniform.
    """
    vals = col.values.astype(float)
    sd = vals.std()
    if sd == 0.0:
        return np.zeros_like(vals)
    return (vals - vals.mean()) / sd


def weighted_sample_without_replacement(rng, weights, size):
    """Successive weighted draws without replacement (renormalizing).

    Returns ``size`` distinct indices; each draw picks with probability
    proportional to the remaining weights. Once only zero-weight items
    remain, draws continue uniformly among them.
    """
    weights = np.asarray(weights, dtype=float).copy()
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    n = weights.size
    if size > n:
        raise ValueError("cannot draw more items than exist")
    active = np.ones(n, dtype=bool)
    out = np.empty(size, dtype=np.int64)
    for t in range(size):
        w = np.where(active, weights, 0.0)
        total = w.sum()
        if total > 0.0:
            u = rng.random() * total
            # side="right" can never land on a zero-weight slot
            pick = int(np.searchsorted(np.cumsum(w), u, side="right"))
            pick = min(pick, n - 1)
        else:
            pool = np.nonzero(active)[0]
            pick = int(pool[rng.integers(0, pool.size)])
        out[t] = pick
        active[pick] = False
    return out


def _round_count(x):
    return int(np.floor(x + 0.5))


def _require_complete(table):
    if not table.is_complete():
        raise MechanismError("missingness induction needs a complete table")


def _apply_mask(table, indicator):
    out = table.copy()
    for j, col in enumerate(out.columns):
        hit = indicator[:, j]
        if not hit.any():
            continue
        col.mask[hit] = True
        if col.kind == NUMERIC:
            col.values[hit] = np.nan
        else:
            col.values[hit] = -1
    return out


def induce_mcar(table, spec):
    """Blank exactly round(gamma * n * p) cells chosen uniformly."""
    _require_complete(table)
    n, p = table.shape
    if spec.gamma * n * p < 1.0:
        raise NoCellsError(f"gamma={spec.gamma} selects no cells in a {n}x{p} table")
    count = _round_count(spec.gamma * n * p)
    rng = np.random.default_rng(spec.seed)
    flat = rng.choice(n * p, size=count, replace=False)
    indicator = np.zeros((n, p), dtype=bool)
    indicator[flat // p, flat % p] = True
    return _apply_mask(table, indicator), InducedMask(indicator, table.column_names())


def _column_streams(seed, p):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(p)]


def induce_mar(table, spec):
    """Blank round(n * gamma) cells per column by a donor column's tails.

    For each column j a donor k != j is drawn (among numeric columns
    when any exist, otherwise factors enter by level code), a fair coin
    picks the upper or lower tail, and cells are drawn without
    replacement with probability proportional to F (or 1 - F) of the
    donor's standardized values. Missingness in column j therefore
    depends only on observed values of another column.
    """
    _require_complete(table)
    n, p = table.shape
    if p < 2:
        raise MechanismError("MAR needs at least two columns")
    count = _round_count(n * spec.gamma)
    numeric_idx = [j for j, c in enumerate(table.columns) if c.kind == NUMERIC]
    indicator = np.zeros((n, p), dtype=bool)
    streams = _column_streams(spec.seed, p)
    for j in range(p):
        rng = streams[j]
        donor_pool = [k for k in numeric_idx if k != j]
        if not donor_pool:
            donor_pool = [k for k in range(p) if k != j]
        donor = donor_pool[rng.integers(0, len(donor_pool))]
        upper = rng.integers(0, 2) == 1
        f = logistic_tail(standardized_values(table.columns[donor]))
        weights = f if upper else 1.0 - f
        if count > 0:
            picks = weighted_sample_without_replacement(rng, weights, count)
            indicator[picks, j] = True
    return _apply_mask(table, indicator), InducedMask(indicator, table.column_names())


def induce_nmar(table, spec):
    """Blank round(n * gamma) cells per column by the column's own tails.

    With probability 1/2 the weights follow F of the column's own
    standardized values (upper tail favored), otherwise 1 - F. The
    realized missingness depends on the values being removed.
    """
    _require_complete(table)
    n, p = table.shape
    count = _round_count(n * spec.gamma)
    indicator = np.zeros((n, p), dtype=bool)
    streams = _column_streams(spec.seed, p)
    for j in range(p):
        rng = streams[j]
        upper = rng.integers(0, 2) == 1
        f = logistic_tail(standardized_values(table.columns[j]))
        weights = f if upper else 1.0 - f
        if count > 0:
            picks = weighted_sample_without_replacement(rng, weights, count)
            indicator[picks, j] = True
    return _apply_mask(table, indicator), InducedMask(indicator, table.column_names())


def induce(table, spec):
    """Dispatch on ``spec.mechanism``."""
    fn = {"mcar": induce_mcar, "mar": induce_mar, "nmar": induce_nmar}[spec.mechanism]
    return fn(table, spec)
