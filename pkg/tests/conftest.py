import numpy as np
import pytest

from rfimpute.table import FACTOR, NUMERIC, Column, MixedTable


def make_numeric_table(values_by_name, masks=None):
    """Build a table of numeric columns from {name: list} (NaN = missing)."""
    cols = []
    for name, vals in values_by_name.items():
        arr = np.asarray(vals, dtype=float)
        mask = np.isnan(arr) if masks is None else np.asarray(masks[name], bool)
        cols.append(Column(name, NUMERIC, arr, mask))
    return MixedTable(cols)


def random_mixed_table(rng, n=30, n_numeric=3, n_factor=2, levels=3,
                       missing_rate=0.0, correlated=False):
    """A random mixed table, optionally with MCAR-style holes."""
    cols = []
    shared = rng.standard_normal(n)
    for j in range(n_numeric):
        vals = rng.standard_normal(n)
        if correlated:
            vals = 0.9 * shared + 0.45 * vals
        mask = rng.random(n) < missing_rate
        vals = vals.copy()
        vals[mask] = np.nan
        cols.append(Column(f"num{j}", NUMERIC, vals, mask))
    for j in range(n_factor):
        codes = rng.integers(0, levels, size=n).astype(np.int32)
        if correlated:
            codes = (shared + 0.5 * rng.standard_normal(n) > 0).astype(np.int32)
        mask = rng.random(n) < missing_rate
        codes = codes.copy()
        codes[mask] = -1
        lv = tuple(f"L{i}" for i in range(max(levels, int(codes.max()) + 1)))
        cols.append(Column(f"fac{j}", FACTOR, codes, mask, lv))
    return MixedTable(cols)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
