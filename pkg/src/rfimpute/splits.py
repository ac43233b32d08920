"""Split criteria: squared-error, Gini, composite multivariate, and
missing-value-as-category splits.

These are the reference implementations of the node-splitting math used
to grow trees. All operate on numpy vectors where NaN marks a missing
entry; rows missing in the split variable (and, per coordinate, in the
response) never enter a criterion sum. The forest growth kernel
re-implements the same formulas in compiled form; tests check the two
against each other.

Conventions: a numeric split at threshold ``s`` sends ``x <= s`` left.
``None`` is returned when no valid split exists (constant predictor,
pure or constant response, or an empty daughter at every candidate).
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def candidate_thresholds(x, nsplit=0, rng=None):
    """Candidate thresholds for a numeric predictor.

    With ``nsplit == 0`` (deterministic splitting) every cut position is
    returned as the midpoint between consecutive distinct observed
    values. With ``nsplit > 0`` at most that many observed values are
    drawn uniformly without replacement, excluding the maximum (which
    would leave an empty right daughter).
    """
    obs = x[~np.isnan(x)]
    distinct = np.unique(obs)
    if distinct.size < 2:
        return np.empty(0)
    if nsplit == 0:
        return (distinct[:-1] + distinct[1:]) / 2.0
    pool = distinct[:-1]
    k = min(nsplit, pool.size)
    if rng is None:
        rng = np.random.default_rng()
    return np.sort(rng.choice(pool, size=k, replace=False))


def best_split_univariate_numeric(y, x, candidates=None):
    """Best squared-error split of a numeric response.

    Minimizes ``D(s) = (1/n) * (SSE_left + SSE_right)`` over the
    candidate thresholds, where the sums of squared deviations use the
    daughter means and ``n`` counts the rows entering the criterion
    (those observed in both ``x`` and ``y``). Returns ``(threshold, D)``
    or ``None``; ties keep the first candidate in the given order.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    used = ~(np.isnan(x) | np.isnan(y))
    xu, yu = x[used], y[used]
    if xu.size < 2 or np.unique(xu).size < 2 or np.unique(yu).size < 2:
        return None
    if candidates is None:
        candidates = candidate_thresholds(xu)
    n = xu.size
    best = None
    for s in np.asarray(candidates, dtype=float):
        left = xu <= s
        n_l = int(left.sum())
        if n_l == 0 or n_l == n:
            continue
        yl, yr = yu[left], yu[~left]
        d = (((yl - yl.mean()) ** 2).sum() + ((yr - yr.mean()) ** 2).sum()) / n
        if best is None or d < best[1] - _EPS:
            best = (float(s), float(d))
    return best


def best_split_univariate_gini(y, x, n_classes=None, candidates=None):
    """Best Gini split of a class-label response.

    Maximizes ``G(s) = sum_k [(1/n_L)(sum_L z_k)^2 + (1/n_R)(sum_R z_k)^2]``
    where ``z_k`` indicates class ``k``. ``y`` holds integer class codes
    with ``-1`` or NaN for missing. Returns ``(threshold, G)`` or ``None``.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    used = ~(np.isnan(x) | np.isnan(y) | (y < 0))
    xu = x[used]
    yu = y[used].astype(int)
    if xu.size < 2 or np.unique(xu).size < 2 or np.unique(yu).size < 2:
        return None
    if n_classes is None:
        n_classes = int(yu.max()) + 1
    if candidates is None:
        candidates = candidate_thresholds(xu)
    best = None
    for s in np.asarray(candidates, dtype=float):
        left = xu <= s
        n_l = int(left.sum())
        n_r = xu.size - n_l
        if n_l == 0 or n_r == 0:
            continue
        g = 0.0
        for k in range(n_classes):
            cl = float((yu[left] == k).sum())
            cr = float((yu[~left] == k).sum())
            g += cl * cl / n_l + cr * cr / n_r
        if best is None or g > best[1] + _EPS:
            best = (float(s), float(g))
    return best


def node_standardize(block):
    """Standardize each response coordinate to mean 0 and mean-square 1.

    Statistics are computed over the non-missing entries of each
    coordinate; missing entries stay NaN. Coordinates with zero variance
    (or fewer than two observed entries) are flagged inert and left
    untouched; callers must skip them.

    Returns ``(standardized, inert)`` where ``inert`` is a boolean per
    coordinate.
    """
    block = np.asarray(block, dtype=float)
    if block.ndim == 1:
        block = block[:, None]
    out = block.copy()
    q = out.shape[1]
    inert = np.zeros(q, dtype=bool)
    for j in range(q):
        col = out[:, j]
        obs = ~np.isnan(col)
        if obs.sum() < 2:
            inert[j] = True
            continue
        mu = col[obs].mean()
        var = ((col[obs] - mu) ** 2).mean()
        if var <= 0.0:
            inert[j] = True
            continue
        out[obs, j] = (col[obs] - mu) / np.sqrt(var)
    return out, inert


def _numeric_term(y_star, left, right):
    """(1/n_L)(sum_L y*)^2 + (1/n_R)(sum_R y*)^2 over non-missing rows."""
    total = 0.0
    for side in (left, right):
        vals = y_star[side]
        vals = vals[~np.isnan(vals)]
        if vals.size:
            total += vals.sum() ** 2 / vals.size
    return total


def _gini_term(codes, n_levels, left, right):
    """Per-coordinate Gini contribution, normalized by the level count."""
    total = 0.0
    for side in (left, right):
        vals = codes[side]
        vals = vals[vals >= 0]
        if not vals.size:
            continue
        counts = np.bincount(vals, minlength=n_levels).astype(float)
        total += (counts**2).sum() / vals.size
    return total / n_levels


def composite_split(x, numeric_responses=None, factor_responses=None,
                    factor_n_levels=None, candidates=None):
    """Best split under the composite multivariate criterion.

    Maximizes ``Theta(s) = D*_q(s) + G*_r(s)``: the sum over numeric
    response coordinates (standardized per :func:`node_standardize`) of
    ``(1/n_L)(sum_L y*)^2 + (1/n_R)(sum_R y*)^2`` plus the sum over
    factor coordinates of the level-count-normalized Gini statistic.
    Every per-coordinate sum and count skips rows missing in that
    coordinate. Returns ``(threshold, theta)`` or ``None`` (constant
    predictor, or every coordinate inert).
    """
    x = np.asarray(x, dtype=float)
    obs_x = ~np.isnan(x)
    if obs_x.sum() < 2 or np.unique(x[obs_x]).size < 2:
        return None

    if numeric_responses is None:
        numeric_responses = np.empty((x.size, 0))
    numeric_responses = np.asarray(numeric_responses, dtype=float)
    if numeric_responses.ndim == 1:
        numeric_responses = numeric_responses[:, None]
    # standardization is a node-level operation: it sees every node row,
    # not just the rows observed in the candidate predictor
    y_star_all, inert = node_standardize(numeric_responses)
    y_star = y_star_all[obs_x]

    if factor_responses is None:
        factor_responses = np.empty((x.size, 0), dtype=int)
        factor_n_levels = []
    else:
        factor_responses = np.asarray(factor_responses, dtype=int)
        if factor_responses.ndim == 1:
            factor_responses = factor_responses[:, None]
        factor_n_levels = list(factor_n_levels)
    fac = factor_responses[obs_x]
    fac_live = []
    for j in range(fac.shape[1]):
        codes = fac[:, j]
        if np.unique(codes[codes >= 0]).size >= 2:
            fac_live.append(j)

    live_numeric = [j for j in range(y_star.shape[1]) if not inert[j]]
    if not live_numeric and not fac_live:
        return None

    xu = x[obs_x]
    if candidates is None:
        candidates = candidate_thresholds(xu)
    best = None
    for s in np.asarray(candidates, dtype=float):
        left = xu <= s
        right = ~left
        if not left.any() or not right.any():
            continue
        theta = 0.0
        for j in live_numeric:
            theta += _numeric_term(y_star[:, j], left, right)
        for j in fac_live:
            theta += _gini_term(fac[:, j], factor_n_levels[j], left, right)
        if best is None or theta > best[1] + _EPS:
            best = (float(s), float(theta))
    return best


def mia_split(y, x, y_is_factor=False, n_classes=None, candidates=None):
    """Best missing-as-category split of the forms A, B, and C.

    Form A sends ``{x <= s or x missing}`` left, form B sends
    ``{x <= s}`` left with missing rows right, and form C separates
    missing from observed. The criterion is the same squared error
    (minimized) or Gini statistic (maximized) as the univariate ops,
    computed over rows with an observed response; rows missing in ``x``
    participate through their assigned side. Returns
    ``(kind, threshold, value)`` with ``kind`` in ``{"A", "B", "C"}``
    and ``threshold=None`` for C, or ``None`` when every form fails.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y_is_factor:
        used = ~(np.isnan(y) | (y < 0))
    else:
        used = ~np.isnan(y)
    xu = x[used]
    yu = y[used]
    y_codes = None
    miss = np.isnan(xu)
    obs = ~miss
    if y_is_factor:
        y_codes = yu.astype(int)
        if n_classes is None:
            n_classes = int(y_codes.max()) + 1 if y_codes.size else 0

    def criterion(left):
        right = ~left
        n_l = int(left.sum())
        n_r = int(right.sum())
        if n_l == 0 or n_r == 0:
            return None
        if y_is_factor:
            g = 0.0
            for k in range(n_classes):
                cl = float((y_codes[left] == k).sum())
                cr = float((y_codes[right] == k).sum())
                g += cl * cl / n_l + cr * cr / n_r
            return g
        yl, yr = yu[left], yu[right]
        return (((yl - yl.mean()) ** 2).sum() + ((yr - yr.mean()) ** 2).sum()) / yu.size

    def better(val, than):
        if than is None:
            return True
        return val > than + _EPS if y_is_factor else val < than - _EPS

    if y_is_factor and np.unique(y_codes).size < 2:
        return None
    if not y_is_factor and np.unique(yu).size < 2:
        return None

    if candidates is None:
        candidates = candidate_thresholds(xu)
    best = None
    for s in np.asarray(candidates, dtype=float):
        le = np.zeros_like(miss)
        le[obs] = xu[obs] <= s
        for kind, left in (("A", le | miss), ("B", le)):
            val = criterion(left)
            if val is not None and (best is None or better(val, best[2])):
                best = (kind, float(s), float(val))
    if miss.any() and obs.any():
        val = criterion(miss)
        if val is not None and (best is None or better(val, best[2])):
            best = ("C", None, float(val))
    return best
