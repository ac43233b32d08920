"""Compiled tree-growth kernel.

One tree is grown per call, entirely inside numba-compiled code, from a
float matrix where NaN marks missing cells (factor columns are encoded
as float level codes). Each call seeds numba's RNG from the per-tree
seed, so results do not depend on scheduling or worker count.

Split criteria are evaluated as nonnegative "gain" statistics (the
criterion value minus its no-split baseline) so that squared-error,
Gini, and composite splits are all maximized; the algebra is equivalent
to minimizing the mean squared-error statistic or maximizing the raw
Gini statistic, which the pure-python reference ops in
:mod:`rfimpute.splits` compute directly. Criterion sums only ever touch
cells observed in the split variable and, per coordinate, observed in
the response.
"""

import numpy as np
from numba import njit

# split rules
RULE_SQERR = 0
RULE_GINI = 1
RULE_COMPOSITE = 2
RULE_UNSUPERVISED = 3
RULE_PURE_RANDOM = 4
RULE_MIA = 5

# node split kinds
SPLIT_NUMERIC = 0  # x <= thr goes left; missing x routed by a transient draw
SPLIT_FACTOR = 1   # level bit set in mask goes left; missing routed by draw
SPLIT_MIA_A = 2    # {x <= thr or missing} left
SPLIT_MIA_B = 3    # {x <= thr} left, missing right
SPLIT_MIA_C = 4    # missing left, observed right

_GAIN_TOL = 1e-12


@njit(cache=True)
def _partial_shuffle_pick(buf, size, k):
    """First k entries of buf[:size] become a uniform draw w/o replacement."""
    for t in range(k):
        j = t + np.random.randint(0, size - t)
        tmp = buf[t]
        buf[t] = buf[j]
        buf[j] = tmp


@njit(cache=True)
def _collect_candidate(X, c, rows, wts, start, end, bx, bw, bent, bmiss):
    """Split segment entries into observed (value/weight/pos) and missing."""
    nobs = 0
    nmiss = 0
    for ii in range(start, end):
        x = X[rows[ii], c]
        if np.isnan(x):
            bmiss[nmiss] = ii
            nmiss += 1
        else:
            bx[nobs] = x
            bw[nobs] = wts[ii]
            bent[nobs] = ii
            nobs += 1
    return nobs, nmiss


@njit(cache=True)
def _distinct_sorted(bx, nobs, sortbuf, dvals):
    for e in range(nobs):
        sortbuf[e] = bx[e]
    sortbuf[:nobs].sort()
    nd = 0
    for e in range(nobs):
        if nd == 0 or sortbuf[e] > dvals[nd - 1]:
            dvals[nd] = sortbuf[e]
            nd += 1
    return nd


@njit(cache=True)
def _draw_thresholds(dvals, nd, nsplit, thrbuf, idxbuf):
    """Candidate thresholds: all midpoints, or nsplit random observed values
    (max excluded so both daughters stay non-empty)."""
    if nsplit == 0:
        nb = nd - 1
        for t in range(nb):
            thrbuf[t] = (dvals[t] + dvals[t + 1]) / 2.0
        return nb
    nb = min(nsplit, nd - 1)
    # partial Fisher-Yates over indices 0..nd-2 without touching dvals
    for t in range(nd - 1):
        idxbuf[t] = t
    _partial_shuffle_pick(idxbuf, nd - 1, nb)
    for t in range(nb):
        thrbuf[t] = dvals[idxbuf[t]]
    thrbuf[:nb].sort()
    return nb


@njit(cache=True)
def _coord_stats(X, col, rows, wts, start, end):
    """Weighted mean/variance of a coordinate over the segment's observed rows."""
    wsum = 0.0
    wy = 0.0
    wy2 = 0.0
    for ii in range(start, end):
        y = X[rows[ii], col]
        if not np.isnan(y):
            w = wts[ii]
            wsum += w
            wy += w * y
            wy2 += w * y * y
    if wsum <= 0.0:
        return 0.0, 0.0, False
    mean = wy / wsum
    var = wy2 / wsum - mean * mean
    if var <= _GAIN_TOL:
        return mean, 0.0, False
    return mean, np.sqrt(var), True


@njit(cache=True)
def _gain_from_sums(s_l, w_l, s_r, w_r):
    """Variance-explained form: S_L^2/W_L + S_R^2/W_R - S^2/W, empty sides 0."""
    g = 0.0
    if w_l > 0.0:
        g += s_l * s_l / w_l
    if w_r > 0.0:
        g += s_r * s_r / w_r
    s = s_l + s_r
    w = w_l + w_r
    if w > 0.0:
        g -= s * s / w
    return g


@njit(cache=True)
def grow_tree(X, kinds, nlev, predictors, responses, rule,
              mtry, ytry, nsplit, nodesize, bootstrap, seed):
    """Grow one tree; returns node arrays, membership, and bookkeeping.

    Returns
    -------
    (node_col, node_kind, node_thr, node_mask, node_left, node_right,
     node_wl, node_wr, seg_start, seg_end, n_nodes, inbag, assign,
     rows, wts, crit_evals)
    """
    np.random.seed(seed)
    n, p = X.shape
    maxK = 2
    for j in range(p):
        if nlev[j] > maxK:
            maxK = nlev[j]

    inbag = np.zeros(n, np.int32)
    if bootstrap == 1:
        for _ in range(n):
            inbag[np.random.randint(0, n)] += 1
    else:
        for i in range(n):
            inbag[i] = 1

    m = 0
    for i in range(n):
        if inbag[i] > 0:
            m += 1
    rows = np.empty(m, np.int32)
    wts = np.empty(m, np.float64)
    k = 0
    for i in range(n):
        if inbag[i] > 0:
            rows[k] = i
            wts[k] = inbag[i]
            k += 1

    cap = 2 * m + 2
    node_col = np.full(cap, -1, np.int32)
    node_kind = np.zeros(cap, np.int8)
    node_thr = np.full(cap, np.nan, np.float64)
    node_mask = np.zeros(cap, np.int64)
    node_left = np.full(cap, -1, np.int32)
    node_right = np.full(cap, -1, np.int32)
    node_wl = np.zeros(cap, np.float64)
    node_wr = np.zeros(cap, np.float64)
    seg_start = np.zeros(cap, np.int32)
    seg_end = np.zeros(cap, np.int32)
    assign = np.full(n, -1, np.int32)
    seg_start[0] = 0
    seg_end[0] = m
    n_nodes = 1
    crit_evals = 0

    npred = predictors.size
    permP = np.empty(npred, np.int64)
    permY = np.empty(p, np.int64)
    coords = np.empty(p, np.int64)

    bx = np.empty(m, np.float64)
    bw = np.empty(m, np.float64)
    bent = np.empty(m, np.int64)
    bmiss = np.empty(m, np.int64)
    sortbuf = np.empty(m, np.float64)
    dvals = np.empty(m, np.float64)
    thrbuf = np.empty(m + 1, np.float64)
    idxbuf = np.empty(m + 1, np.int64)
    bidx = np.empty(m, np.int64)
    cumw = np.empty(m, np.float64)

    nbuckets = m + 2  # thresholds + 1, plus one spare
    cnt = np.empty(nbuckets, np.int64)
    agg_w = np.empty(nbuckets, np.float64)
    agg_s = np.empty(nbuckets, np.float64)
    agg_cls = np.empty(nbuckets * maxK, np.float64)
    gthrA = np.empty(nbuckets, np.float64)
    gthrB = np.empty(nbuckets, np.float64)

    npart_cap = max(nsplit, maxK) + 1
    partbuf = np.empty(npart_cap, np.int64)
    gpart = np.empty(npart_cap, np.float64)
    lvl_cnt = np.empty(maxK, np.int64)
    lvl_w = np.empty(maxK, np.float64)
    lvl_s = np.empty(maxK, np.float64)
    lvl_cls = np.empty(maxK * maxK, np.float64)
    obs_codes = np.empty(maxK, np.int64)

    mu = np.empty(p, np.float64)
    sdv = np.empty(p, np.float64)
    coord_ok = np.empty(p, np.int8)
    coord_cached = np.empty(p, np.int8)

    stack = np.empty(cap * 3, np.int64)
    stack[0] = 0
    stack[1] = 0
    stack[2] = m
    sp = 3

    while sp > 0:
        sp -= 3
        node = stack[sp]
        start = stack[sp + 1]
        end = stack[sp + 2]
        n_unique = end - start

        best_gain = -1.0
        best_col = -1
        best_kind = np.int8(0)
        best_thr = np.nan
        best_mask = np.int64(0)
        found_pure = False

        if n_unique >= 2 * nodesize and n_unique >= 2:
            for j in range(p):
                coord_cached[j] = 0

            for t in range(npred):
                permP[t] = predictors[t]
            n_cand = min(mtry, npred)
            _partial_shuffle_pick(permP, npred, n_cand)

            for ci in range(n_cand):
                c = permP[ci]
                nobs, nmiss = _collect_candidate(
                    X, c, rows, wts, start, end, bx, bw, bent, bmiss)

                # which response coordinates this candidate is scored on
                ncoord = 0
                if rule == RULE_SQERR or rule == RULE_GINI or rule == RULE_MIA:
                    coords[0] = responses[0]
                    ncoord = 1
                elif rule == RULE_COMPOSITE:
                    for t in range(responses.size):
                        coords[t] = responses[t]
                    ncoord = responses.size
                elif rule == RULE_UNSUPERVISED:
                    nother = 0
                    for j in range(p):
                        if j != c:
                            permY[nother] = j
                            nother += 1
                    ncoord = min(ytry, nother)
                    _partial_shuffle_pick(permY, nother, ncoord)
                    for t in range(ncoord):
                        coords[t] = permY[t]

                if kinds[c] == 0:
                    # ---- numeric candidate ----
                    nd = _distinct_sorted(bx, nobs, sortbuf, dvals)
                    if rule == RULE_PURE_RANDOM:
                        if nd < 2:
                            continue
                        thr = dvals[np.random.randint(0, nd - 1)]
                        nl = 0
                        for e in range(nobs):
                            if bx[e] <= thr:
                                nl += 1
                        if nl >= nodesize and nobs - nl >= nodesize:
                            best_col = c
                            best_kind = SPLIT_NUMERIC
                            best_thr = thr
                            found_pure = True
                            break
                        continue

                    if nd < 2:
                        if rule != RULE_MIA or nmiss == 0 or nobs == 0:
                            continue
                        nb = 0
                    else:
                        nb = _draw_thresholds(dvals, nd, nsplit, thrbuf, idxbuf)

                    for e in range(nobs):
                        bidx[e] = np.searchsorted(thrbuf[:nb], bx[e])
                    for b in range(nb + 1):
                        cnt[b] = 0
                        gthrA[b] = 0.0
                        gthrB[b] = 0.0
                    for e in range(nobs):
                        cnt[bidx[e]] += 1
                    gain_c = 0.0  # MIA split C accumulator

                    for t in range(ncoord):
                        rc = coords[t]
                        is_factor = kinds[rc] == 1
                        scale = 1.0
                        center = 0.0
                        if not is_factor and (rule == RULE_COMPOSITE or rule == RULE_UNSUPERVISED):
                            if coord_cached[rc] == 0:
                                mn, sd, ok = _coord_stats(X, rc, rows, wts, start, end)
                                mu[rc] = mn
                                sdv[rc] = sd
                                coord_ok[rc] = 1 if ok else 0
                                coord_cached[rc] = 1
                            if coord_ok[rc] == 0:
                                continue
                            center = mu[rc]
                            scale = sdv[rc]

                        if not is_factor:
                            for b in range(nb + 1):
                                agg_w[b] = 0.0
                                agg_s[b] = 0.0
                            miss_w = 0.0
                            miss_s = 0.0
                            for e in range(nobs):
                                y = X[rows[bent[e]], rc]
                                if np.isnan(y):
                                    continue
                                w = bw[e]
                                b = bidx[e]
                                agg_w[b] += w
                                agg_s[b] += w * (y - center) / scale
                            if rule == RULE_MIA:
                                for e in range(nmiss):
                                    ii = bmiss[e]
                                    y = X[rows[ii], rc]
                                    if np.isnan(y):
                                        continue
                                    miss_w += wts[ii]
                                    miss_s += wts[ii] * (y - center) / scale
                            tot_w = miss_w
                            tot_s = miss_s
                            for b in range(nb + 1):
                                tot_w += agg_w[b]
                                tot_s += agg_s[b]
                            run_w = 0.0
                            run_s = 0.0
                            for b in range(nb):
                                run_w += agg_w[b]
                                run_s += agg_s[b]
                                if rule == RULE_MIA:
                                    gthrA[b] += _gain_from_sums(
                                        run_s + miss_s, run_w + miss_w,
                                        tot_s - run_s - miss_s,
                                        tot_w - run_w - miss_w)
                                    gthrB[b] += _gain_from_sums(
                                        run_s, run_w,
                                        tot_s - run_s, tot_w - run_w)
                                else:
                                    gthrA[b] += _gain_from_sums(
                                        run_s, run_w, tot_s - run_s, tot_w - run_w)
                            if rule == RULE_MIA:
                                gain_c += _gain_from_sums(
                                    miss_s, miss_w, tot_s - miss_s, tot_w - miss_w)
                        else:
                            K = nlev[rc]
                            norm = 1.0 / K if (rule == RULE_COMPOSITE or rule == RULE_UNSUPERVISED) else 1.0
                            for b in range((nb + 2) * K):
                                agg_cls[b] = 0.0
                            # bucket nb+1 holds the missing-x rows (MIA only)
                            for e in range(nobs):
                                y = X[rows[bent[e]], rc]
                                if np.isnan(y):
                                    continue
                                agg_cls[bidx[e] * K + int(y)] += bw[e]
                            if rule == RULE_MIA:
                                for e in range(nmiss):
                                    ii = bmiss[e]
                                    y = X[rows[ii], rc]
                                    if np.isnan(y):
                                        continue
                                    agg_cls[(nb + 1) * K + int(y)] += wts[ii]
                            # per-class totals (lvl_w) across all buckets
                            tot_w = 0.0
                            for kk in range(K):
                                tot = 0.0
                                for b in range(nb + 2):
                                    tot += agg_cls[b * K + kk]
                                lvl_w[kk] = tot
                                tot_w += tot
                            if tot_w <= 0.0:
                                continue
                            base = 0.0
                            for kk in range(K):
                                base += lvl_w[kk] * lvl_w[kk]
                            base /= tot_w
                            miss_wk = 0.0
                            for kk in range(K):
                                miss_wk += agg_cls[(nb + 1) * K + kk]
                            # running per-class sums over threshold buckets
                            for kk in range(K):
                                lvl_s[kk] = 0.0
                            for b in range(nb):
                                w_l = 0.0
                                for kk in range(K):
                                    lvl_s[kk] += agg_cls[b * K + kk]
                                    w_l += lvl_s[kk]
                                w_r = tot_w - w_l
                                if rule == RULE_MIA:
                                    w_la = w_l + miss_wk
                                    g_a = 0.0
                                    g_b = 0.0
                                    for kk in range(K):
                                        cl = lvl_s[kk]
                                        cmiss = agg_cls[(nb + 1) * K + kk]
                                        tot_k = lvl_w[kk]
                                        if w_la > 0.0:
                                            g_a += (cl + cmiss) * (cl + cmiss) / w_la
                                        if tot_w - w_la > 0.0:
                                            g_a += (tot_k - cl - cmiss) * (tot_k - cl - cmiss) / (tot_w - w_la)
                                        if w_l > 0.0:
                                            g_b += cl * cl / w_l
                                        if tot_w - w_l > 0.0:
                                            g_b += (tot_k - cl) * (tot_k - cl) / (tot_w - w_l)
                                    gthrA[b] += norm * (g_a - base)
                                    gthrB[b] += norm * (g_b - base)
                                else:
                                    g = 0.0
                                    for kk in range(K):
                                        cl = lvl_s[kk]
                                        cr = lvl_w[kk] - cl
                                        if w_l > 0.0:
                                            g += cl * cl / w_l
                                        if w_r > 0.0:
                                            g += cr * cr / w_r
                                    gthrA[b] += norm * (g - base)
                            if rule == RULE_MIA and miss_wk > 0.0:
                                g = 0.0
                                for kk in range(K):
                                    cmiss = agg_cls[(nb + 1) * K + kk]
                                    crest = lvl_w[kk] - cmiss
                                    if miss_wk > 0.0:
                                        g += cmiss * cmiss / miss_wk
                                    if tot_w - miss_wk > 0.0:
                                        g += crest * crest / (tot_w - miss_wk)
                                gain_c += norm * (g - base)

                    # pick best threshold for this candidate
                    run_cnt = 0
                    for b in range(nb):
                        run_cnt += cnt[b]
                        crit_evals += 1
                        left_cnt = run_cnt
                        right_cnt = nobs - run_cnt
                        if rule == RULE_MIA:
                            crit_evals += 1
                            # A routes missing left, B routes missing right
                            if left_cnt + nmiss >= nodesize and right_cnt >= nodesize:
                                if gthrA[b] > best_gain + _GAIN_TOL and gthrA[b] > _GAIN_TOL:
                                    best_gain = gthrA[b]
                                    best_col = c
                                    best_kind = SPLIT_MIA_A
                                    best_thr = thrbuf[b]
                            if left_cnt >= nodesize and right_cnt + nmiss >= nodesize:
                                if gthrB[b] > best_gain + _GAIN_TOL and gthrB[b] > _GAIN_TOL:
                                    best_gain = gthrB[b]
                                    best_col = c
                                    best_kind = SPLIT_MIA_B
                                    best_thr = thrbuf[b]
                        else:
                            if left_cnt >= nodesize and right_cnt >= nodesize:
                                if gthrA[b] > best_gain + _GAIN_TOL and gthrA[b] > _GAIN_TOL:
                                    best_gain = gthrA[b]
                                    best_col = c
                                    best_kind = SPLIT_NUMERIC
                                    best_thr = thrbuf[b]
                    if rule == RULE_MIA and nmiss >= nodesize and nobs >= nodesize:
                        crit_evals += 1
                        if gain_c > best_gain + _GAIN_TOL and gain_c > _GAIN_TOL:
                            best_gain = gain_c
                            best_col = c
                            best_kind = SPLIT_MIA_C
                            best_thr = np.nan

                else:
                    # ---- factor candidate ----
                    K_c = nlev[c]
                    for kk in range(K_c):
                        lvl_cnt[kk] = 0
                    for e in range(nobs):
                        lvl_cnt[int(bx[e])] += 1
                    n_obs_lvl = 0
                    for kk in range(K_c):
                        if lvl_cnt[kk] > 0:
                            obs_codes[n_obs_lvl] = kk
                            n_obs_lvl += 1
                    if n_obs_lvl < 2:
                        continue

                    if rule == RULE_PURE_RANDOM:
                        r = np.random.randint(1, (1 << n_obs_lvl) - 1)
                        mask = np.int64(0)
                        for t in range(n_obs_lvl):
                            if (r >> t) & 1:
                                mask |= np.int64(1) << obs_codes[t]
                        nl = 0
                        for e in range(nobs):
                            if (mask >> int(bx[e])) & 1:
                                nl += 1
                        if nl >= nodesize and nobs - nl >= nodesize:
                            best_col = c
                            best_kind = SPLIT_FACTOR
                            best_mask = mask
                            found_pure = True
                            break
                        continue

                    # candidate partitions
                    if nsplit == 0:
                        npart = n_obs_lvl
                        for t in range(n_obs_lvl):
                            partbuf[t] = np.int64(1) << obs_codes[t]
                    else:
                        npart = nsplit
                        for t in range(nsplit):
                            r = np.random.randint(1, (1 << n_obs_lvl) - 1)
                            mask = np.int64(0)
                            for b in range(n_obs_lvl):
                                if (r >> b) & 1:
                                    mask |= np.int64(1) << obs_codes[b]
                            partbuf[t] = mask
                    for t in range(npart):
                        gpart[t] = 0.0

                    for t in range(ncoord):
                        rc = coords[t]
                        is_factor = kinds[rc] == 1
                        scale = 1.0
                        center = 0.0
                        if not is_factor and (rule == RULE_COMPOSITE or rule == RULE_UNSUPERVISED):
                            if coord_cached[rc] == 0:
                                mn, sd, ok = _coord_stats(X, rc, rows, wts, start, end)
                                mu[rc] = mn
                                sdv[rc] = sd
                                coord_ok[rc] = 1 if ok else 0
                                coord_cached[rc] = 1
                            if coord_ok[rc] == 0:
                                continue
                            center = mu[rc]
                            scale = sdv[rc]

                        if not is_factor:
                            for kk in range(K_c):
                                lvl_w[kk] = 0.0
                                lvl_s[kk] = 0.0
                            for e in range(nobs):
                                y = X[rows[bent[e]], rc]
                                if np.isnan(y):
                                    continue
                                code = int(bx[e])
                                w = bw[e]
                                lvl_w[code] += w
                                lvl_s[code] += w * (y - center) / scale
                            for t in range(npart):
                                mask = partbuf[t]
                                s_l = 0.0
                                w_l = 0.0
                                s_a = 0.0
                                w_a = 0.0
                                for kk in range(K_c):
                                    w_a += lvl_w[kk]
                                    s_a += lvl_s[kk]
                                    if (mask >> kk) & 1:
                                        s_l += lvl_s[kk]
                                        w_l += lvl_w[kk]
                                gpart[t] += _gain_from_sums(
                                    s_l, w_l, s_a - s_l, w_a - w_l)
                        else:
                            K = nlev[rc]
                            norm = 1.0 / K if (rule == RULE_COMPOSITE or rule == RULE_UNSUPERVISED) else 1.0
                            for b in range(K_c * K):
                                lvl_cls[b] = 0.0
                            for e in range(nobs):
                                y = X[rows[bent[e]], rc]
                                if np.isnan(y):
                                    continue
                                lvl_cls[int(bx[e]) * K + int(y)] += bw[e]
                            for t in range(npart):
                                mask = partbuf[t]
                                w_l = 0.0
                                w_a = 0.0
                                g = 0.0
                                base = 0.0
                                for kk in range(K):
                                    cl = 0.0
                                    ca = 0.0
                                    for lc in range(K_c):
                                        v = lvl_cls[lc * K + kk]
                                        ca += v
                                        if (mask >> lc) & 1:
                                            cl += v
                                    lvl_s[kk] = cl
                                    lvl_w[kk] = ca
                                    w_a += ca
                                    w_l += cl
                                w_r = w_a - w_l
                                if w_a <= 0.0:
                                    continue
                                for kk in range(K):
                                    cl = lvl_s[kk]
                                    cr = lvl_w[kk] - cl
                                    if w_l > 0.0:
                                        g += cl * cl / w_l
                                    if w_r > 0.0:
                                        g += cr * cr / w_r
                                    base += lvl_w[kk] * lvl_w[kk]
                                base /= w_a
                                gpart[t] += norm * (g - base)

                    for t in range(npart):
                        crit_evals += 1
                        mask = partbuf[t]
                        nl = 0
                        for kk in range(K_c):
                            if (mask >> kk) & 1:
                                nl += lvl_cnt[kk]
                        nr = nobs - nl
                        if nl >= nodesize and nr >= nodesize:
                            if gpart[t] > best_gain + _GAIN_TOL and gpart[t] > _GAIN_TOL:
                                best_gain = gpart[t]
                                best_col = c
                                best_kind = SPLIT_FACTOR
                                best_mask = mask
                                best_thr = np.nan

        if best_col < 0:
            # terminal node
            node_col[node] = -1
            for ii in range(start, end):
                assign[rows[ii]] = node
            continue

        # re-collect the chosen candidate for routing draws
        c = best_col
        nobs, nmiss = _collect_candidate(
            X, c, rows, wts, start, end, bx, bw, bent, bmiss)
        total_w = 0.0
        for e in range(nobs):
            total_w += bw[e]
            cumw[e] = total_w

        node_col[node] = c
        node_kind[node] = best_kind
        node_thr[node] = best_thr
        node_mask[node] = best_mask

        i = start
        j = end - 1
        w_l = 0.0
        w_r = 0.0
        while i <= j:
            r = rows[i]
            x = X[r, c]
            xmiss = np.isnan(x)
            if best_kind == SPLIT_MIA_A:
                go_left = xmiss or x <= best_thr
            elif best_kind == SPLIT_MIA_B:
                go_left = (not xmiss) and x <= best_thr
            elif best_kind == SPLIT_MIA_C:
                go_left = xmiss
            else:
                if xmiss:
                    # transient draw from the node's inbag non-missing pool
                    u = np.random.random() * total_w
                    e = np.searchsorted(cumw[:nobs], u)
                    if e >= nobs:
                        e = nobs - 1
                    x = bx[e]
                if best_kind == SPLIT_FACTOR:
                    go_left = ((best_mask >> int(x)) & 1) == 1
                else:
                    go_left = x <= best_thr
            if go_left:
                w_l += wts[i]
                i += 1
            else:
                w = wts[i]
                rows[i] = rows[j]
                wts[i] = wts[j]
                rows[j] = r
                wts[j] = w
                w_r += w
                j -= 1

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        node_left[node] = left_id
        node_right[node] = right_id
        node_wl[node] = w_l
        node_wr[node] = w_r
        seg_start[left_id] = start
        seg_end[left_id] = i
        seg_start[right_id] = i
        seg_end[right_id] = end

        stack[sp] = left_id
        stack[sp + 1] = start
        stack[sp + 2] = i
        sp += 3
        stack[sp] = right_id
        stack[sp + 1] = i
        stack[sp + 2] = end
        sp += 3

    # route out-of-bag rows using the stored segment pools
    for r in range(n):
        if inbag[r] > 0:
            continue
        node = 0
        while node_col[node] >= 0:
            node = _route_step(X, r, node, node_col, node_kind, node_thr,
                               node_mask, node_left, node_right, node_wl,
                               node_wr, seg_start, seg_end, rows, wts)
        assign[r] = node

    return (node_col[:n_nodes], node_kind[:n_nodes], node_thr[:n_nodes],
            node_mask[:n_nodes], node_left[:n_nodes], node_right[:n_nodes],
            node_wl[:n_nodes], node_wr[:n_nodes], seg_start[:n_nodes],
            seg_end[:n_nodes], inbag, assign, rows, wts, crit_evals)


@njit(cache=True)
def _route_step(X, r, node, node_col, node_kind, node_thr, node_mask,
                node_left, node_right, node_wl, node_wr,
                seg_start, seg_end, rows, wts):
    """One routing step for row r at an internal node, drawing when needed."""
    c = node_col[node]
    kind = node_kind[node]
    thr = node_thr[node]
    x = X[r, c]
    xmiss = np.isnan(x)
    if kind == SPLIT_MIA_A:
        go_left = xmiss or x <= thr
    elif kind == SPLIT_MIA_B:
        go_left = (not xmiss) and x <= thr
    elif kind == SPLIT_MIA_C:
        go_left = xmiss
    else:
        if xmiss:
            # draw from this node's inbag non-missing pool
            total_w = 0.0
            for ii in range(seg_start[node], seg_end[node]):
                v = X[rows[ii], c]
                if not np.isnan(v):
                    total_w += wts[ii]
            if total_w <= 0.0:
                # empty pool: route by daughter inbag weights
                w_l = node_wl[node]
                w_r = node_wr[node]
                tot = w_l + w_r
                go_left = np.random.random() * tot < w_l if tot > 0.0 else np.random.random() < 0.5
                return node_left[node] if go_left else node_right[node]
            u = np.random.random() * total_w
            acc = 0.0
            x = np.nan
            for ii in range(seg_start[node], seg_end[node]):
                v = X[rows[ii], c]
                if not np.isnan(v):
                    acc += wts[ii]
                    x = v
                    if u <= acc:
                        break
        if kind == SPLIT_FACTOR:
            go_left = ((node_mask[node] >> int(x)) & 1) == 1
        else:
            go_left = x <= thr
    return node_left[node] if go_left else node_right[node]


@njit(cache=True)
def route_rows(X, node_col, node_kind, node_thr, node_mask,
               node_left, node_right, node_wl, node_wr,
               seg_start, seg_end, rows, wts, seed):
    """Assign every row of X to a terminal node (prediction-time routing)."""
    np.random.seed(seed)
    n = X.shape[0]
    out = np.empty(n, np.int32)
    for r in range(n):
        node = 0
        while node_col[node] >= 0:
            node = _route_step(X, r, node, node_col, node_kind, node_thr,
                               node_mask, node_left, node_right, node_wl,
                               node_wr, seg_start, seg_end, rows, wts)
        out[r] = node
    return out


@njit(cache=True)
def accumulate_proximity(assign, inbag, co_terminal, co_inbag):
    """Add one tree's inbag co-membership counts into the running matrices."""
    n = assign.size
    for i in range(n):
        if inbag[i] == 0:
            continue
        for j in range(i, n):
            if inbag[j] == 0:
                continue
            co_inbag[i, j] += 1
            if assign[i] == assign[j]:
                co_terminal[i, j] += 1
