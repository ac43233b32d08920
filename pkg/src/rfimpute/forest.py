"""Randomized tree ensembles over mixed-type tables with missing data.

Trees are grown by the compiled kernel in :mod:`rfimpute._kernels`; this
module owns configuration, bookkeeping (inbag/out-of-bag membership,
terminal assignments), proximity matrices, terminal-node imputation, and
model serialization.

Missing split-variable values never enter a split criterion. During
growth and routing they are handled "on the fly": a value is drawn at
random from the node's inbag non-missing values, the row is routed, and
the draw is forgotten (missing-as-category splits route missing rows
deterministically instead).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from joblib import Parallel, delayed

from . import _kernels as K
from .errors import ConfigError
from .table import FACTOR, NUMERIC

MAX_FACTOR_LEVELS = 60


class SplitRule(Enum):
    SQUARED_ERROR = "squared_error"
    GINI = "gini"
    COMPOSITE = "composite"
    UNSUPERVISED = "unsupervised"
    PURE_RANDOM = "pure_random"
    MIA = "mia"


_RULE_CODE = {
    SplitRule.SQUARED_ERROR: K.RULE_SQERR,
    SplitRule.GINI: K.RULE_GINI,
    SplitRule.COMPOSITE: K.RULE_COMPOSITE,
    SplitRule.UNSUPERVISED: K.RULE_UNSUPERVISED,
    SplitRule.PURE_RANDOM: K.RULE_PURE_RANDOM,
    SplitRule.MIA: K.RULE_MIA,
}


@dataclass
class ForestConfig:
    """Forest hyperparameters.

    ``mtry`` and ``ytry`` default to round(sqrt(#predictors)) and
    round(sqrt(p)) when left as None. ``nsplit`` of 0 means
    deterministic splitting (every cut position is evaluated); a
    positive value evaluates at most that many randomly drawn split
    points per candidate. ``nodesize`` is the minimum number of unique
    data points a daughter node must keep.
    """

    ntree: int = 100
    mtry: int | None = None
    nodesize: int = 1
    nsplit: int = 10
    ytry: int | None = None
    split_rule: SplitRule = SplitRule.UNSUPERVISED
    seed: int = 0
    bootstrap: bool = True

    def validate(self):
        if self.ntree < 1:
            raise ConfigError("ntree must be >= 1")
        if self.nodesize < 1:
            raise ConfigError("nodesize must be >= 1")
        if self.nsplit < 0:
            raise ConfigError("nsplit must be >= 0")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1")
        if self.ytry is not None and self.ytry < 1:
            raise ConfigError("ytry must be >= 1")


@dataclass
class Tree:
    """One grown tree: node arrays plus membership bookkeeping.

    ``seg_start``/``seg_end`` index into ``rows``/``wts``, whose final
    ordering makes every node's inbag membership a contiguous slice;
    this is how value pools for on-the-fly routing are reconstructed.
    ``assign`` maps every training row (inbag and out-of-bag) to its
    terminal node.
    """

    col: np.ndarray
    kind: np.ndarray
    thr: np.ndarray
    mask: np.ndarray
    left: np.ndarray
    right: np.ndarray
    wl: np.ndarray
    wr: np.ndarray
    seg_start: np.ndarray
    seg_end: np.ndarray
    inbag: np.ndarray
    assign: np.ndarray
    rows: np.ndarray
    wts: np.ndarray
    crit_evals: int

    @property
    def n_nodes(self):
        return len(self.col)

    @property
    def n_terminal(self):
        return int((self.col < 0).sum())

    def max_depth(self):
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.col[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max()) if self.n_nodes else 0


@dataclass
class ForestModel:
    """A trained ensemble plus the table metadata it was grown against."""

    config: ForestConfig
    trees: list
    n_rows: int
    column_names: list
    column_kinds: np.ndarray
    n_levels: np.ndarray
    predictors: np.ndarray
    responses: np.ndarray

    @property
    def ntree(self):
        return len(self.trees)

    @property
    def inbag_counts(self):
        return np.stack([t.inbag for t in self.trees])

    @property
    def oob_mask(self):
        return np.stack([t.inbag == 0 for t in self.trees])

    @property
    def assignments(self):
        return np.stack([t.assign for t in self.trees])

    @property
    def criterion_evals(self):
        return int(sum(t.crit_evals for t in self.trees))


def _tree_seeds(seed, ntree):
    ss = np.random.SeedSequence(seed)
    return ss.generate_state(ntree, dtype=np.uint32)


def _grow_one(X, kinds, nlev, predictors, responses, rule_code, mtry, ytry,
              nsplit, nodesize, bootstrap, tree_seed):
    out = K.grow_tree(X, kinds, nlev, predictors, responses, rule_code,
                      mtry, ytry, nsplit, nodesize, bootstrap, tree_seed)
    return Tree(*out)


def _resolve_columns(table, config, response_spec):
    """Predictor/response index sets for the configured split rule."""
    rule = config.split_rule
    names = table.column_names()
    p = len(names)

    def indices(spec):
        cols = [spec] if isinstance(spec, str) else list(spec)
        return np.array([table.column_index(c) for c in cols], dtype=np.int64)

    if rule in (SplitRule.SQUARED_ERROR, SplitRule.GINI, SplitRule.MIA):
        if response_spec is None:
            raise ConfigError(f"{rule.value} splitting needs a response column")
        responses = indices(response_spec)
        if responses.size != 1:
            raise ConfigError(f"{rule.value} splitting takes exactly one response")
        r = int(responses[0])
        col = table.columns[r]
        if rule == SplitRule.SQUARED_ERROR and col.kind != NUMERIC:
            raise ConfigError("squared-error splitting needs a numeric response")
        if rule == SplitRule.GINI and col.kind != FACTOR:
            raise ConfigError("gini splitting needs a factor response")
        predictors = np.array([j for j in range(p) if j != r], dtype=np.int64)
    elif rule == SplitRule.COMPOSITE:
        if response_spec is None:
            raise ConfigError("composite splitting needs a response column set")
        responses = indices(response_spec)
        if responses.size == 0:
            raise ConfigError("composite splitting needs a non-empty response set")
        rset = set(responses.tolist())
        predictors = np.array([j for j in range(p) if j not in rset], dtype=np.int64)
    else:
        if response_spec is not None and rule == SplitRule.UNSUPERVISED:
            raise ConfigError("unsupervised splitting takes no response")
        responses = np.empty(0, dtype=np.int64)
        predictors = np.arange(p, dtype=np.int64)

    if predictors.size == 0:
        raise ConfigError("no predictor columns remain")
    return predictors, responses


def grow_forest(table, config, response_spec=None, n_jobs=1):
    """Grow an ensemble on a table (which may contain missing cells).

    ``response_spec`` names the response column (squared-error, gini,
    missing-as-category rules) or column set (composite rule); it must
    be None for unsupervised and pure-random splitting. Growth is
    deterministic given ``config.seed`` regardless of ``n_jobs``.
    """
    config.validate()
    X, kinds, nlev = table.to_matrix()
    if nlev.max(initial=0) > MAX_FACTOR_LEVELS:
        raise ConfigError(f"factor columns are limited to {MAX_FACTOR_LEVELS} levels")
    predictors, responses = _resolve_columns(table, config, response_spec)

    mtry = config.mtry
    if mtry is None:
        mtry = max(1, int(round(np.sqrt(predictors.size))))
    if mtry > predictors.size:
        raise ConfigError(f"mtry={mtry} exceeds the {predictors.size} predictors")
    ytry = config.ytry
    if ytry is None:
        ytry = max(1, int(round(np.sqrt(table.n_cols))))
    ytry = min(ytry, table.n_cols - 1)
    if config.split_rule == SplitRule.UNSUPERVISED and ytry < 1:
        raise ConfigError("unsupervised splitting needs ytry >= 1 (p >= 2)")

    rule_code = _RULE_CODE[config.split_rule]
    seeds = _tree_seeds(config.seed, config.ntree)
    args = (X, kinds, nlev, predictors, responses, rule_code,
            mtry, ytry, config.nsplit, config.nodesize,
            1 if config.bootstrap else 0)
    if n_jobs == 1 or config.ntree == 1:
        trees = [_grow_one(*args, int(s)) for s in seeds]
    else:
        trees = Parallel(n_jobs=n_jobs)(
            delayed(_grow_one)(*args, int(s)) for s in seeds)

    resolved = replace(config, mtry=mtry, ytry=ytry)
    return ForestModel(
        config=resolved,
        trees=trees,
        n_rows=table.n_rows,
        column_names=table.column_names(),
        column_kinds=kinds,
        n_levels=nlev,
        predictors=predictors,
        responses=responses,
    )


def assign_with_otf(x, split_point, inbag_values, rng, daughter_weights=(1.0, 1.0)):
    """Route one value at an internal node; True means the left daughter.

    ``split_point`` is a float threshold (left means ``x <= s``) or a
    set of factor level codes that go left. A missing ``x`` (None or
    NaN) is imputed transiently by drawing from ``inbag_values``, the
    node's inbag non-missing values for the split column; the draw only
    routes the row and is then discarded. With an empty pool the row is
    routed at random with probability proportional to the daughter
    inbag sizes.
    """
    missing = x is None or (isinstance(x, float) and np.isnan(x))
    if missing:
        pool = np.asarray(inbag_values)
        if pool.size == 0:
            wl, wr = daughter_weights
            total = wl + wr
            if total <= 0:
                return bool(rng.random() < 0.5)
            return bool(rng.random() * total < wl)
        x = pool[rng.integers(0, pool.size)]
    if isinstance(split_point, (set, frozenset)):
        return int(x) in split_point
    return bool(x <= split_point)


@dataclass
class ProximityMatrix:
    """Inbag co-occurrence counts: same terminal node vs. same bootstrap."""

    co_terminal: np.ndarray
    co_inbag: np.ndarray

    @property
    def n(self):
        return self.co_terminal.shape[0]

    def normalized(self):
        """co_terminal / co_inbag with zero where a pair never co-occurs."""
        ct = self.co_terminal.astype(np.float64)
        ci = self.co_inbag.astype(np.float64)
        out = np.divide(ct, ci, out=np.zeros_like(ct), where=ci > 0)
        return out


def proximity(model):
    """Accumulate the n x n proximity matrix over all trees."""
    n = model.n_rows
    co_terminal = np.zeros((n, n), dtype=np.int32)
    co_inbag = np.zeros((n, n), dtype=np.int32)
    for tree in model.trees:
        K.accumulate_proximity(tree.assign, tree.inbag, co_terminal, co_inbag)
    # the kernel fills the upper triangle
    iu = np.triu_indices(n, k=1)
    co_terminal[(iu[1], iu[0])] = co_terminal[iu]
    co_inbag[(iu[1], iu[0])] = co_inbag[iu]
    return ProximityMatrix(co_terminal=co_terminal, co_inbag=co_inbag)


def _strawman_values(table, eligible_mask):
    """Per-column fallback fill values restricted to eligible cells."""
    out = []
    for j, col in enumerate(table.columns):
        ok = eligible_mask[:, j]
        vals = col.values[ok]
        if vals.size == 0:
            out.append(None)
        elif col.kind == NUMERIC:
            out.append(float(np.median(vals)))
        else:
            counts = np.bincount(vals.astype(int), minlength=len(col.levels))
            out.append(int(counts.argmax()))
    return out


def terminal_impute_otf(model, table, use_oob=True, target_mask=None,
                        pool_exclude_mask=None):
    """Fill missing cells from terminal-node co-members across all trees.

    For each target cell (i, j), the non-missing j-values of the rows
    sharing row i's terminal node are pooled over every tree: the
    out-of-bag co-members when ``use_oob`` (first imputation cycle),
    otherwise the inbag co-members weighted by bootstrap multiplicity.
    Numeric cells take the pooled mean, factor cells the maximal class.
    An empty pool falls back to the eligible-cell median/mode.

    ``target_mask`` selects the cells to fill (default: the table's
    missing cells); ``pool_exclude_mask`` removes cells from the pools,
    which iterated algorithms use to keep previously imputed values out
    of the donor data.
    """
    n, p = table.shape
    X, kinds, nlev = table.to_matrix()
    if target_mask is None:
        target_mask = table.missing_mask()
    pool_ok = ~np.isnan(X)
    if pool_exclude_mask is not None:
        pool_ok &= ~pool_exclude_mask

    num_cols = [j for j in range(p) if kinds[j] == 0 and target_mask[:, j].any()]
    fac_cols = [j for j in range(p) if kinds[j] == 1 and target_mask[:, j].any()]
    acc_sum = {j: np.zeros(n) for j in num_cols}
    acc_wt = {j: np.zeros(n) for j in num_cols}
    acc_cls = {j: np.zeros((n, int(nlev[j]))) for j in fac_cols}

    for tree in model.trees:
        assign = tree.assign
        n_nodes = tree.n_nodes
        if use_oob:
            w = (tree.inbag == 0).astype(np.float64)
        else:
            w = tree.inbag.astype(np.float64)
        for j in num_cols:
            ok = pool_ok[:, j] & (w > 0)
            if not ok.any():
                continue
            node_ids = assign[ok]
            vals = X[ok, j]
            wv = w[ok]
            node_wt = np.bincount(node_ids, weights=wv, minlength=n_nodes)
            node_sum = np.bincount(node_ids, weights=wv * vals, minlength=n_nodes)
            rows_i = np.nonzero(target_mask[:, j])[0]
            acc_sum[j][rows_i] += node_sum[assign[rows_i]]
            acc_wt[j][rows_i] += node_wt[assign[rows_i]]
        for j in fac_cols:
            ok = pool_ok[:, j] & (w > 0)
            if not ok.any():
                continue
            node_ids = assign[ok]
            codes = X[ok, j].astype(np.int64)
            wv = w[ok]
            Kj = int(nlev[j])
            flat = np.bincount(node_ids * Kj + codes, weights=wv,
                               minlength=n_nodes * Kj).reshape(n_nodes, Kj)
            rows_i = np.nonzero(target_mask[:, j])[0]
            acc_cls[j][rows_i] += flat[assign[rows_i]]

    fallback = _strawman_values(table, pool_ok)
    out = X.copy()
    for j in num_cols:
        rows_i = np.nonzero(target_mask[:, j])[0]
        for i in rows_i:
            if acc_wt[j][i] > 0:
                out[i, j] = acc_sum[j][i] / acc_wt[j][i]
            else:
                if fallback[j] is None:
                    raise ValueError(f"no donor values for column {table.columns[j].name!r}")
                out[i, j] = fallback[j]
    for j in fac_cols:
        rows_i = np.nonzero(target_mask[:, j])[0]
        for i in rows_i:
            weights = acc_cls[j][i]
            if weights.sum() > 0:
                out[i, j] = float(int(weights.argmax()))
            else:
                if fallback[j] is None:
                    raise ValueError(f"no donor values for column {table.columns[j].name!r}")
                out[i, j] = float(fallback[j])
    return table.with_matrix(out)


def route_table(model, table, seed=0):
    """Terminal-node assignment of (possibly new) rows in every tree.

    Missing split values are routed on the fly by drawing from the
    grow-time node pools, reconstructed from the persisted membership
    slices. Returns an ``ntree x n`` int array of terminal node ids.
    """
    X, kinds, nlev = table.to_matrix()
    seeds = _tree_seeds(seed, len(model.trees))
    out = np.empty((len(model.trees), table.n_rows), dtype=np.int32)
    for t, tree in enumerate(model.trees):
        out[t] = K.route_rows(X, tree.col, tree.kind, tree.thr, tree.mask,
                              tree.left, tree.right, tree.wl, tree.wr,
                              tree.seg_start, tree.seg_end, tree.rows,
                              tree.wts, int(seeds[t]))
    return out


FOREST_FORMAT_VERSION = 1

_TREE_FIELDS = ("col", "kind", "thr", "mask", "left", "right", "wl", "wr",
                "seg_start", "seg_end", "inbag", "assign", "rows", "wts")


def save_forest(model, path):
    """Serialize a model to a single .npz file (versioned)."""
    blobs = {}
    meta = {
        "format_version": FOREST_FORMAT_VERSION,
        "ntree": model.ntree,
        "n_rows": model.n_rows,
        "column_names": model.column_names,
        "crit_evals": [t.crit_evals for t in model.trees],
        "config": {
            "ntree": model.config.ntree,
            "mtry": model.config.mtry,
            "nodesize": model.config.nodesize,
            "nsplit": model.config.nsplit,
            "ytry": model.config.ytry,
            "split_rule": model.config.split_rule.value,
            "seed": model.config.seed,
            "bootstrap": model.config.bootstrap,
        },
    }
    blobs["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    blobs["column_kinds"] = model.column_kinds
    blobs["n_levels"] = model.n_levels
    blobs["predictors"] = model.predictors
    blobs["responses"] = model.responses
    for t, tree in enumerate(model.trees):
        for name in _TREE_FIELDS:
            blobs[f"t{t}_{name}"] = getattr(tree, name)
    np.savez_compressed(path, **blobs)


def load_forest(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["format_version"] != FOREST_FORMAT_VERSION:
            raise ValueError(f"unsupported forest format {meta['format_version']}")
        cfg = meta["config"]
        config = ForestConfig(
            ntree=cfg["ntree"], mtry=cfg["mtry"], nodesize=cfg["nodesize"],
            nsplit=cfg["nsplit"], ytry=cfg["ytry"],
            split_rule=SplitRule(cfg["split_rule"]), seed=cfg["seed"],
            bootstrap=cfg["bootstrap"])
        trees = []
        for t in range(meta["ntree"]):
            fields = {name: data[f"t{t}_{name}"] for name in _TREE_FIELDS}
            trees.append(Tree(**fields, crit_evals=meta["crit_evals"][t]))
        return ForestModel(
            config=config,
            trees=trees,
            n_rows=meta["n_rows"],
            column_names=list(meta["column_names"]),
            column_kinds=data["column_kinds"],
            n_levels=data["n_levels"],
            predictors=data["predictors"],
            responses=data["responses"],
        )
