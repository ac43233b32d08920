"""The imputation algorithm family.

Every algorithm consumes a table with missing cells and returns a
completed copy; originally observed cells are never touched. The
iterated forest algorithms also return a trace of per-iteration change
statistics and timings.

Methods
-------
strawman    median / most-frequent-level fill (the baseline)
prx, prxR   proximity-weighted fill from a forest grown on a rough
            completion, with random or pure-random splitting, iterated
otf, otfR   on-the-fly imputation: the forest is grown directly on the
            incomplete data and missing cells filled from terminal-node
            co-members, iterated
unsv        on-the-fly imputation under multivariate unsupervised
            splitting with drawn pseudo-responses
mforest     grouped missForest: columns are partitioned into groups of
            size ~ alpha*p, each group regressed on the rest with a
            composite multivariate forest and refilled by prediction,
            cycling until the change statistic stops improving
knn         k-nearest-neighbor fill over a mixed-type distance
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AllMissingError, ConfigError
from .forest import (
    ForestConfig,
    SplitRule,
    grow_forest,
    proximity,
    terminal_impute_otf,
)
from .metrics import table_change
from .table import NUMERIC

METHODS = ("strawman", "prx", "prxR", "otf", "otfR", "unsv", "mforest", "knn")


@dataclass
class ImputeSpec:
    """Which algorithm to run and with what knobs.

    ``iterations`` applies to the prx/otf/unsv families; ``alpha``,
    ``epsilon`` and ``max_iterations`` to mforest; ``knn_k``,
    ``rowmax`` and ``colmax`` to knn. ``forest`` carries the shared
    forest hyperparameters and the master seed.
    """

    method: str
    iterations: int = 1
    alpha: float = 0.25
    epsilon: float = 1e-5
    max_iterations: int = 10
    knn_k: int = 10
    rowmax: float = 1.0
    colmax: float = 1.0
    forest: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.epsilon <= 0.0:
            raise ConfigError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.knn_k < 1:
            raise ConfigError("knn_k must be >= 1")
        if not (0.0 <= self.rowmax <= 1.0 and 0.0 <= self.colmax <= 1.0):
            raise ConfigError("rowmax and colmax must lie in [0, 1]")


@dataclass
class IterationRecord:
    seconds: float
    total_change: float
    change: dict


@dataclass
class ImputationTrace:
    iterations: list
    stop_reason: str

    def to_json_dict(self):
        return {
            "stop_reason": self.stop_reason,
            "iterations": [
                {
                    "seconds": rec.seconds,
                    "total_change": rec.total_change,
                    "change": rec.change,
                }
                for rec in self.iterations
            ],
        }


def _seed_stream(seed):
    """Deterministic stream of 32-bit seeds derived from the master seed."""
    ss = np.random.SeedSequence(seed)
    block = 4096
    offset = 0
    while True:
        state = np.random.SeedSequence((seed, offset)).generate_state(
            block, dtype=np.uint32) if offset else ss.generate_state(
            block, dtype=np.uint32)
        for s in state:
            yield int(s)
        offset += 1


def strawman(table, seed=0):
    """Median fill for numeric columns, most frequent level for factors.

    Modal ties are broken at random (seeded). Raises
    :class:`AllMissingError` for a column with no observed values.
    """
    rng = np.random.default_rng(seed)
    out = table.copy()
    for col in out.columns:
        if not col.mask.any():
            continue
        obs = col.observed()
        if obs.size == 0:
            raise AllMissingError(col.name)
        if col.kind == NUMERIC:
            fill = float(np.median(obs))
        else:
            counts = np.bincount(obs.astype(int), minlength=len(col.levels))
            top = np.nonzero(counts == counts.max())[0]
            fill = int(top[rng.integers(0, top.size)])
        col.values[col.mask] = fill
        col.mask[:] = False
    return out


def _check_all_missing(table):
    for col in table.columns:
        if col.observed().size == 0:
            raise AllMissingError(col.name)


def proximity_weighted_fill(current, prox, orig_mask, fallback_seed=0):
    """Fill originally-missing cells from proximity-weighted donors.

    Numeric cells take ``sum_l prox(i,l) x_lj / sum_l prox(i,l)`` over
    the rows l originally observed in column j; factor cells take the
    class with the largest average proximity to row i. Cells whose
    proximities to every donor are zero fall back to the strawman value.
    """
    out = current.copy()
    rng = np.random.default_rng(fallback_seed)
    for j, col in enumerate(out.columns):
        targets = np.nonzero(orig_mask[:, j])[0]
        if targets.size == 0:
            continue
        donors = np.nonzero(~orig_mask[:, j])[0]
        donor_vals = col.values[donors]
        if donors.size == 0:
            raise AllMissingError(col.name)
        W = prox[np.ix_(targets, donors)]
        if col.kind == NUMERIC:
            strawman_val = float(np.median(donor_vals))
            den = W.sum(axis=1)
            num = W @ donor_vals
            vals = np.where(den > 0, num / np.where(den > 0, den, 1.0), strawman_val)
            col.values[targets] = vals
        else:
            counts = np.bincount(donor_vals.astype(int), minlength=len(col.levels))
            top = np.nonzero(counts == counts.max())[0]
            strawman_val = int(top[rng.integers(0, top.size)])
            K = len(col.levels)
            avg = np.full((targets.size, K), -np.inf)
            for c in range(K):
                in_c = donor_vals.astype(int) == c
                if in_c.any():
                    avg[:, c] = W[:, in_c].mean(axis=1)
            best = avg.argmax(axis=1)
            allzero = ~(avg > 0).any(axis=1)
            col.values[targets] = np.where(allzero, strawman_val, best)
    return out


def impute_proximity(table, spec, n_jobs=1):
    """Iterated proximity imputation (strategy: preimpute, grow, refill).

    The table is strawman-initialized, a forest is grown on the
    completed data (unsupervised splitting, or pure-random for the prxR
    variant), and the originally-missing cells are refilled from the
    proximity matrix; the loop repeats ``spec.iterations`` times.
    """
    _check_all_missing(table)
    orig_mask = table.missing_mask()
    seeds = _seed_stream(spec.forest.seed)
    rule = SplitRule.PURE_RANDOM if spec.method == "prxR" else SplitRule.UNSUPERVISED
    current = strawman(table, seed=next(seeds))
    records = []
    for _ in range(spec.iterations):
        t0 = time.perf_counter()
        cfg = replace(spec.forest, split_rule=rule, seed=next(seeds))
        model = grow_forest(current, cfg, n_jobs=n_jobs)
        prox = proximity(model).normalized()
        new = proximity_weighted_fill(current, prox, orig_mask,
                                      fallback_seed=next(seeds))
        total, per_col = table_change(current, new, orig_mask)
        records.append(IterationRecord(time.perf_counter() - t0, total, per_col))
        current = new
    return current, ImputationTrace(records, "iterations_exhausted")


def _resolve_otf_rule(spec, table, response):
    if spec.method == "otfR":
        return SplitRule.PURE_RANDOM, None
    if spec.method == "unsv" or response is None:
        return SplitRule.UNSUPERVISED, None
    col = table.column(response)
    rule = SplitRule.SQUARED_ERROR if col.kind == NUMERIC else SplitRule.GINI
    return rule, response


def impute_otf(table, spec, response=None, n_jobs=1):
    """On-the-fly imputation: grow on the incomplete table, then fill.

    The first cycle grows the forest directly on the incomplete table
    (missing split values are routed by transient draws) and fills each
    missing cell from its out-of-bag terminal co-members. Later cycles
    regrow on the completed table and refill the same cells from inbag
    co-members, keeping previously imputed values out of the donor
    pools; after the first cycle no coherent out-of-bag sample exists.

    With a ``response`` column the trees split on it (squared error or
    Gini by kind); without one, or for the unsv method, multivariate
    unsupervised splitting is used. The otfR variant splits purely at
    random.
    """
    _check_all_missing(table)
    orig_mask = table.missing_mask()
    seeds = _seed_stream(spec.forest.seed)
    strawman_seed = next(seeds)
    rule, resp = _resolve_otf_rule(spec, table, response)
    records = []
    current = table
    reference = None  # previous completion; cycle 1 measures against strawman
    for it in range(spec.iterations):
        t0 = time.perf_counter()
        cfg = replace(spec.forest, split_rule=rule, seed=next(seeds))
        model = grow_forest(current, cfg, response_spec=resp, n_jobs=n_jobs)
        if it == 0:
            new = terminal_impute_otf(model, current, use_oob=True)
            reference = strawman(table, seed=strawman_seed)
        else:
            new = terminal_impute_otf(
                model, current, use_oob=False,
                target_mask=orig_mask, pool_exclude_mask=orig_mask)
        total, per_col = table_change(reference, new, orig_mask)
        records.append(IterationRecord(time.perf_counter() - t0, total, per_col))
        reference = new
        current = new
    return current, ImputationTrace(records, "iterations_exhausted")


def impute_unsupervised(table, spec, n_jobs=1):
    """On-the-fly imputation under multivariate unsupervised splitting."""
    return impute_otf(table, spec, response=None, n_jobs=n_jobs)


def mforest_groups(rng, p, alpha):
    """Random partition of column indices into groups of size ~ alpha*p.

    Group size is ``max(1, round(alpha * p))``; the last group may be
    smaller. ``alpha = 1/p`` gives singleton groups (classic
    one-variable-at-a-time regression).
    """
    m = max(1, int(np.floor(alpha * p + 0.5)))
    perm = rng.permutation(p)
    return [perm[i:i + m].tolist() for i in range(0, p, m)]


def impute_mforest(table, spec, n_jobs=1):
    """Grouped missForest with composite multivariate splitting.

    Columns are partitioned into mutually exclusive groups each cycle.
    For each group in turn, its originally-missing cells are reset to
    missing, a forest regresses the group on the remaining (complete)
    columns with the composite splitting rule, and the cells are
    refilled from inbag terminal co-members. After a full cycle the
    change statistic between successive completions is compared against
    the previous cycle's: the run stops when it increases (returning the
    previous completion), drops below ``spec.epsilon``, or hits
    ``spec.max_iterations``.
    """
    _check_all_missing(table)
    orig_mask = table.missing_mask()
    n, p = table.shape
    seeds = _seed_stream(spec.forest.seed)
    group_rng = np.random.default_rng(next(seeds))
    current = strawman(table, seed=next(seeds))
    names = table.column_names()
    records = []
    prev_change = None
    stop_reason = "max_iterations"
    for _ in range(spec.max_iterations):
        t0 = time.perf_counter()
        work = current
        for group in mforest_groups(group_rng, p, spec.alpha):
            group_mask = np.zeros_like(orig_mask)
            group_mask[:, group] = orig_mask[:, group]
            if not group_mask.any():
                continue
            X, _, _ = work.to_matrix()
            X[group_mask] = np.nan
            reset = work.with_matrix(X)
            cfg = replace(spec.forest, split_rule=SplitRule.COMPOSITE,
                          seed=next(seeds))
            model = grow_forest(reset, cfg,
                                response_spec=[names[j] for j in group],
                                n_jobs=n_jobs)
            work = terminal_impute_otf(model, reset, use_oob=False,
                                       target_mask=group_mask)
        total, per_col = table_change(current, work, orig_mask)
        records.append(IterationRecord(time.perf_counter() - t0, total, per_col))
        if prev_change is not None and total > prev_change:
            stop_reason = "diverged"
            break
        current = work
        if total <= spec.epsilon:
            stop_reason = "converged"
            break
        prev_change = total
    return current, ImputationTrace(records, stop_reason)


def _knn_fallback_values(table):
    """Rough overall column fill: mean for numeric, modal level for factors."""
    out = []
    for col in table.columns:
        obs = col.observed()
        if obs.size == 0:
            raise AllMissingError(col.name)
        if col.kind == NUMERIC:
            out.append(float(obs.mean()))
        else:
            counts = np.bincount(obs.astype(int), minlength=len(col.levels))
            out.append(int(counts.argmax()))
    return out


def impute_knn(table, spec):
    """k-nearest-neighbor fill over a mixed-type distance.

    Distances average squared differences of standardized numeric
    columns and 0/1 factor mismatches over the columns observed in both
    rows (restricted to the query row's observed columns). Each missing
    cell takes the mean (numeric) or majority level (factor) of the k
    nearest rows observed in the target column. Rows or columns whose
    missing fraction exceeds ``rowmax`` / ``colmax`` are filled with the
    rough overall column mean or modal level instead.
    """
    _check_all_missing(table)
    n, p = table.shape
    X, kinds, nlev = table.to_matrix()
    obs = ~np.isnan(X)
    fallback = _knn_fallback_values(table)
    out = X.copy()

    col_frac = 1.0 - obs.mean(axis=0)
    row_frac = 1.0 - obs.mean(axis=1)
    col_over = col_frac > spec.colmax
    row_over = row_frac > spec.rowmax

    # standardized numeric matrix (zeros at missing so matmuls ignore them)
    Z = np.zeros_like(X)
    for j in range(p):
        if kinds[j] == 0:
            vals = X[obs[:, j], j]
            sd = vals.std()
            mu = vals.mean()
            z = (X[:, j] - mu) / sd if sd > 0 else np.zeros(n)
            Z[obs[:, j], j] = z[obs[:, j]]

    num_cols = kinds == 0
    M = obs.astype(np.float64)
    Zn = Z[:, num_cols] * M[:, num_cols]
    Mn = M[:, num_cols]
    sq = Zn**2
    d2 = sq @ Mn.T + Mn @ sq.T - 2.0 * (Zn @ Zn.T)
    cnt = Mn @ Mn.T
    for j in range(p):
        if kinds[j] == 1:
            cj = X[:, j]
            oj = obs[:, j]
            both = np.outer(oj, oj)
            eq = (cj[:, None] == cj[None, :]) & both
            d2 += both.astype(float) - eq.astype(float)
            cnt += both.astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = np.where(cnt > 0, d2 / cnt, np.inf)
    np.clip(dist, 0.0, None, out=dist)

    for i in range(n):
        miss_j = np.nonzero(~obs[i])[0]
        if miss_j.size == 0:
            continue
        if row_over[i]:
            for j in miss_j:
                out[i, j] = fallback[j]
            continue
        order = np.lexsort((np.arange(n), dist[i]))
        order = order[order != i]
        for j in miss_j:
            if col_over[j]:
                out[i, j] = fallback[j]
                continue
            donors = []
            for l in order:
                if obs[l, j] and np.isfinite(dist[i, l]):
                    donors.append(l)
                    if len(donors) == spec.knn_k:
                        break
            if not donors:
                out[i, j] = fallback[j]
            elif kinds[j] == 0:
                out[i, j] = X[donors, j].mean()
            else:
                counts = np.bincount(X[donors, j].astype(int), minlength=int(nlev[j]))
                out[i, j] = float(int(counts.argmax()))
    return table.with_matrix(out)


def impute(table, spec, response=None, n_jobs=1):
    """Run the algorithm named by ``spec.method``.

    Returns ``(completed_table, trace_or_None)``; the trace is only
    produced by the iterated forest algorithms.
    """
    if spec.method == "strawman":
        return strawman(table, seed=spec.forest.seed), None
    if spec.method == "knn":
        return impute_knn(table, spec), None
    if spec.method in ("prx", "prxR"):
        return impute_proximity(table, spec, n_jobs=n_jobs)
    if spec.method in ("otf", "otfR"):
        return impute_otf(table, spec, response=response, n_jobs=n_jobs)
    if spec.method == "unsv":
        return impute_unsupervised(table, spec, n_jobs=n_jobs)
    if spec.method == "mforest":
        return impute_mforest(table, spec, n_jobs=n_jobs)
    raise ConfigError(f"unknown method {spec.method!r}")
