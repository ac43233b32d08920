import numpy as np
import pytest

from rfimpute.ampute import MissingnessSpec, induce_mcar
from rfimpute.errors import AllMissingError, ConfigError
from rfimpute.forest import ForestConfig
from rfimpute.impute import (
    ImputeSpec,
    impute,
    impute_knn,
    impute_mforest,
    impute_otf,
    impute_proximity,
    mforest_groups,
    proximity_weighted_fill,
    strawman,
)
from rfimpute.metrics import relative_error, score
from rfimpute.table import FACTOR, NUMERIC, Column, MixedTable

from conftest import make_numeric_table, random_mixed_table


def small_forest(seed=0, ntree=15, nodesize=3):
    return ForestConfig(ntree=ntree, nodesize=nodesize, nsplit=10, seed=seed)


def assert_observed_untouched(before, after):
    for b, a in zip(before.columns, after.columns):
        ok = ~b.mask
        assert np.array_equal(a.values[ok], b.values[ok])
        assert not a.mask.any()


class TestStrawman:
    def test_numeric_median(self):
        t = make_numeric_table({"x": [1.0, np.nan, 3.0]})
        out = strawman(t)
        assert out.column("x").values[1] == 2.0

    def test_factor_mode(self):
        codes = np.array([0, 0, 1, -1], np.int32)
        t = MixedTable([Column("f", FACTOR, codes, codes < 0, ("a", "b"))])
        out = strawman(t)
        assert out.column("f").levels[int(out.column("f").values[3])] == "a"

    def test_tie_broken_at_random_but_seeded(self):
        codes = np.array([0, 1, -1], np.int32)
        t = MixedTable([Column("f", FACTOR, codes, codes < 0, ("a", "b"))])
        picks = {int(strawman(t, seed=s).column("f").values[2]) for s in range(30)}
        assert picks == {0, 1}
        assert (strawman(t, seed=7).column("f").values[2]
                == strawman(t, seed=7).column("f").values[2])

    def test_all_missing_column_raises(self):
        t = make_numeric_table({"x": [np.nan, np.nan]})
        with pytest.raises(AllMissingError):
            strawman(t)


class TestSpecValidation:
    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            ImputeSpec(method="nope")

    def test_alpha_range(self):
        with pytest.raises(ConfigError):
            ImputeSpec(method="mforest", alpha=0.0)
        with pytest.raises(ConfigError):
            ImputeSpec(method="mforest", alpha=1.5)

    def test_iterations_positive(self):
        with pytest.raises(ConfigError):
            ImputeSpec(method="otf", iterations=0)


class TestProximityFill:
    def test_degenerate_weight_copies_donor(self):
        current = make_numeric_table({"x": [0.0, 5.0, 7.0]})
        orig_mask = np.array([[True], [False], [False]])
        prox = np.array([[1.0, 1.0, 0.0],
                         [1.0, 1.0, 0.0],
                         [0.0, 0.0, 1.0]])
        out = proximity_weighted_fill(current, prox, orig_mask)
        assert out.column("x").values[0] == 5.0

    def test_uniform_proximity_equals_column_mean(self, rng):
        vals = rng.standard_normal(10)
        current = make_numeric_table({"x": vals})
        orig_mask = np.zeros((10, 1), bool)
        orig_mask[:3, 0] = True
        prox = np.ones((10, 10))
        out = proximity_weighted_fill(current, prox, orig_mask)
        expected = vals[3:].mean()
        for i in range(3):
            assert out.column("x").values[i] == pytest.approx(expected, rel=1e-15)

    def test_factor_largest_average_proximity(self):
        codes = np.array([-1, 0, 0, 1], np.int32)
        current = MixedTable([Column("f", FACTOR, np.array([0, 0, 0, 1], np.int32),
                                     np.zeros(4, bool), ("a", "b"))])
        orig_mask = np.array([[True], [False], [False], [False]])
        prox = np.array([
            [1.0, 0.1, 0.2, 0.9],
            [0.1, 1.0, 0.0, 0.0],
            [0.2, 0.0, 1.0, 0.0],
            [0.9, 0.0, 0.0, 1.0],
        ])
        out = proximity_weighted_fill(current, prox, orig_mask)
        # class b average 0.9 beats class a average 0.15
        assert out.column("f").levels[int(out.column("f").values[0])] == "b"

    def test_zero_proximity_falls_back_to_strawman(self):
        current = make_numeric_table({"x": [0.0, 1.0, 2.0, 9.0]})
        orig_mask = np.array([[True], [False], [False], [False]])
        prox = np.zeros((4, 4))
        out = proximity_weighted_fill(current, prox, orig_mask)
        assert out.column("x").values[0] == 2.0  # median of donors

    def test_matches_recomputation_from_dumped_matrix(self, rng):
        from rfimpute.forest import SplitRule, grow_forest, proximity, replace

        t = random_mixed_table(rng, n=5, n_numeric=2, n_factor=0,
                               missing_rate=0.3, correlated=True)
        spec = ImputeSpec(method="prx", iterations=1, forest=small_forest(3, ntree=3))
        out, _ = impute_proximity(t, spec)
        # replay: same strawman init, same forest, same proximity matrix
        from rfimpute.impute import _seed_stream

        seeds = _seed_stream(spec.forest.seed)
        init = strawman(t, seed=next(seeds))
        cfg = replace(spec.forest, split_rule=SplitRule.UNSUPERVISED,
                      seed=next(seeds))
        prox = proximity(grow_forest(init, cfg)).normalized()
        orig = t.missing_mask()
        for j, col in enumerate(t.columns):
            targets = np.nonzero(orig[:, j])[0]
            donors = np.nonzero(~orig[:, j])[0]
            for i in targets:
                w = prox[i, donors]
                if w.sum() > 0:
                    expected = (w * init.columns[j].values[donors]).sum() / w.sum()
                    assert out.columns[j].values[i] == pytest.approx(expected)


class TestOtf:
    def test_complete_table_is_identity(self, rng):
        t = random_mixed_table(rng, n=30)
        spec = ImputeSpec(method="otf", iterations=2, forest=small_forest())
        out, trace = impute_otf(t, spec)
        assert out.equals(t)

    def test_single_cell_single_node_tree(self, rng):
        n = 14
        vals = rng.standard_normal(n)
        vals[5] = np.nan
        t = make_numeric_table({"x": vals, "z": rng.standard_normal(n)})
        spec = ImputeSpec(method="otf", iterations=1,
                          forest=ForestConfig(ntree=1, nodesize=n, seed=2))
        out, _ = impute_otf(t, spec)
        from rfimpute.forest import grow_forest
        from rfimpute.forest import SplitRule
        from dataclasses import replace as dc_replace
        from rfimpute.impute import _seed_stream

        seeds = _seed_stream(spec.forest.seed)
        next(seeds)  # strawman seed
        cfg = dc_replace(spec.forest, split_rule=SplitRule.UNSUPERVISED,
                         seed=next(seeds))
        model = grow_forest(t, cfg)
        oob = model.trees[0].inbag == 0
        pool = [v for i, v in enumerate(vals) if oob[i] and not np.isnan(v)]
        assert out.column("x").values[5] == pytest.approx(np.mean(pool))

    def test_trace_contract(self, rng):
        t = random_mixed_table(rng, n=60, missing_rate=0.25, correlated=True)
        spec = ImputeSpec(method="otf", iterations=5, forest=small_forest(4))
        out, trace = impute_otf(t, spec)
        assert len(trace.iterations) == 5
        assert trace.stop_reason == "iterations_exhausted"
        for rec in trace.iterations:
            assert np.isfinite(rec.total_change)
        assert out.is_complete()
        assert_observed_untouched(t, out)

    def test_supervised_response_used(self, rng):
        n = 80
        x = rng.standard_normal(n)
        y = x + 0.05 * rng.standard_normal(n)
        xm = x.copy()
        xm[rng.random(n) < 0.3] = np.nan
        t = make_numeric_table({"y": y, "x": xm, "noise": rng.standard_normal(n)})
        spec = ImputeSpec(method="otf", iterations=1, forest=small_forest(1, ntree=25))
        sup, _ = impute_otf(t, spec, response="y")
        assert sup.is_complete()

    def test_determinism(self, rng):
        t = random_mixed_table(rng, n=40, missing_rate=0.3)
        spec = ImputeSpec(method="otf", iterations=2, forest=small_forest(5))
        a, _ = impute_otf(t, spec)
        b, _ = impute_otf(t, spec)
        assert a.equals(b)

    def test_pure_random_variant(self, rng):
        t = random_mixed_table(rng, n=40, missing_rate=0.3)
        spec = ImputeSpec(method="otfR", iterations=2, forest=small_forest(6))
        out, _ = impute(t, spec)
        assert out.is_complete()


class TestUnsupervised:
    def test_two_column_table(self, rng):
        # p=2: each candidate's pseudo-response must be the other column
        n = 60
        x = rng.standard_normal(n)
        y = x + 0.1 * rng.standard_normal(n)
        xm = x.copy()
        xm[rng.random(n) < 0.25] = np.nan
        t = make_numeric_table({"a": xm, "b": y})
        spec = ImputeSpec(method="unsv", iterations=1, forest=small_forest(7))
        out, _ = impute(t, spec)
        assert out.is_complete()

    def test_beats_strawman_on_correlated_pairs(self):
        # two perfectly correlated columns, 25% holes: relative error < 100
        # in at least 95 of 100 seeded runs
        wins = 0
        runs = 100
        for s in range(runs):
            rng = np.random.default_rng(1000 + s)
            n = 200
            x = rng.standard_normal(n)
            t = make_numeric_table({"a": x, "b": x.copy()})
            amputed, mask = induce_mcar(t, MissingnessSpec("mcar", 0.25, seed=s))
            spec = ImputeSpec(method="unsv", iterations=1,
                              forest=small_forest(s, ntree=20, nodesize=5))
            out, _ = impute(amputed, spec)
            base = score(t, strawman(amputed, seed=s), mask)
            if relative_error(score(t, out, mask), base) < 100.0:
                wins += 1
        assert wins >= 95


class TestMForest:
    def test_group_arithmetic(self):
        rng = np.random.default_rng(0)
        groups = mforest_groups(rng, 10, 0.1)
        assert len(groups) == 10
        assert all(len(g) == 1 for g in groups)
        groups = mforest_groups(rng, 10, 0.25)
        assert [len(g) for g in groups] == [3, 3, 3, 1]
        groups = mforest_groups(rng, 20, 0.05)
        assert len(groups) == 20

    def test_groups_partition_columns(self):
        rng = np.random.default_rng(1)
        for alpha in (0.1, 0.3, 0.5, 1.0):
            groups = mforest_groups(rng, 13, alpha)
            flat = sorted(c for g in groups for c in g)
            assert flat == list(range(13))

    def test_converges_and_completes(self, rng):
        t = random_mixed_table(rng, n=80, missing_rate=0.25, correlated=True)
        spec = ImputeSpec(method="mforest", alpha=0.25, max_iterations=5,
                          forest=small_forest(8))
        out, trace = impute_mforest(t, spec)
        assert out.is_complete()
        assert_observed_untouched(t, out)
        assert trace.stop_reason in ("diverged", "converged", "max_iterations")
        assert len(trace.iterations) <= 5

    def test_diverged_returns_previous_iterate(self, rng):
        t = random_mixed_table(rng, n=60, missing_rate=0.3, correlated=True)
        spec = ImputeSpec(method="mforest", alpha=0.5, max_iterations=8,
                          forest=small_forest(9))
        out, trace = impute_mforest(t, spec)
        if trace.stop_reason == "diverged":
            # change of the last recorded cycle exceeds the one before it
            changes = [r.total_change for r in trace.iterations]
            assert changes[-1] > changes[-2]

    def test_determinism(self, rng):
        t = random_mixed_table(rng, n=50, missing_rate=0.25)
        spec = ImputeSpec(method="mforest", alpha=0.34, max_iterations=3,
                          forest=small_forest(10))
        a, _ = impute_mforest(t, spec)
        b, _ = impute_mforest(t, spec)
        assert a.equals(b)


class TestKnn:
    def test_duplicate_row_copied(self):
        t = make_numeric_table({
            "a": [1.0, 1.0, 5.0],
            "b": [2.0, 2.0, 9.0],
            "c": [np.nan, 7.0, 3.0],
        })
        spec = ImputeSpec(method="knn", knn_k=1)
        out = impute_knn(t, spec)
        assert out.column("c").values[0] == 7.0

    def test_rowmax_zero_forces_column_means(self, rng):
        vals = rng.standard_normal(10)
        vals[0] = np.nan
        t = make_numeric_table({"x": vals, "y": rng.standard_normal(10)})
        spec = ImputeSpec(method="knn", knn_k=3, rowmax=0.0)
        out = impute_knn(t, spec)
        assert out.column("x").values[0] == pytest.approx(np.nanmean(vals))

    def test_colmax_threshold(self, rng):
        vals = rng.standard_normal(10)
        vals[:6] = np.nan
        t = make_numeric_table({"x": vals, "y": rng.standard_normal(10)})
        spec = ImputeSpec(method="knn", knn_k=2, colmax=0.5)
        out = impute_knn(t, spec)
        for i in range(6):
            assert out.column("x").values[i] == pytest.approx(np.nanmean(vals))

    def test_six_row_bruteforce(self):
        t = make_numeric_table({
            "a": [0.0, 0.1, 0.2, 3.0, 3.1, np.nan],
            "b": [1.0, 1.1, 0.9, 5.0, 5.1, 1.05],
            "c": [2.0, 2.2, 1.8, 7.0, 7.2, 2.1],
        })
        spec = ImputeSpec(method="knn", knn_k=2)
        out = impute_knn(t, spec)
        # brute force: row 5 is closest to rows 0..2 in standardized b/c space
        X = np.column_stack([t.columns[j].values for j in range(3)])
        Z = (X - np.nanmean(X, axis=0)) / np.nanstd(X, axis=0)
        d = []
        for l in range(5):
            diff = Z[5, 1:] - Z[l, 1:]
            d.append((np.mean(diff**2), l))
        nearest = [l for _, l in sorted(d)[:2]]
        expected = X[nearest, 0].mean()
        assert out.column("a").values[5] == pytest.approx(expected)

    def test_matches_quadratic_oracle(self, rng):
        # numeric-only tables, moderate missingness, k=3
        for trial in range(5):
            n = 30
            t = random_mixed_table(rng, n=n, n_numeric=4, n_factor=0,
                                   missing_rate=0.2)
            spec = ImputeSpec(method="knn", knn_k=3)
            out = impute_knn(t, spec)
            X = np.column_stack([c.values for c in t.columns])
            obs = ~np.isnan(X)
            Z = X.copy()
            for j in range(4):
                col = X[obs[:, j], j]
                Z[:, j] = (X[:, j] - col.mean()) / (col.std() if col.std() > 0 else 1)
            for i in range(n):
                for j in range(4):
                    if obs[i, j]:
                        continue
                    dists = []
                    for l in range(n):
                        if l == i or not obs[l, j]:
                            continue
                        both = obs[i] & obs[l]
                        if not both.any():
                            continue
                        diff = Z[i, both] - Z[l, both]
                        dists.append((np.mean(diff**2), l))
                    dists.sort()
                    donors = [l for _, l in dists[:3]]
                    expected = X[donors, j].mean()
                    assert out.columns[j].values[i] == pytest.approx(expected)

    def test_factor_majority(self, rng):
        n = 12
        codes = np.array([0] * 6 + [1] * 5 + [-1], np.int32)
        base = rng.standard_normal(n)
        t = MixedTable([
            Column("f", FACTOR, codes, codes < 0, ("a", "b")),
            Column("x", NUMERIC, base, np.zeros(n, bool)),
        ])
        spec = ImputeSpec(method="knn", knn_k=11)
        out = impute_knn(t, spec)
        assert out.column("f").levels[int(out.column("f").values[-1])] == "a"


class TestDispatcher:
    def test_all_methods_complete_preserve_and_repeat(self, rng):
        t = random_mixed_table(rng, n=50, missing_rate=0.2, correlated=True)
        for method in ("strawman", "prx", "prxR", "otf", "otfR", "unsv",
                       "mforest", "knn"):
            spec = ImputeSpec(method=method, iterations=2,
                              alpha=0.4, max_iterations=2,
                              forest=small_forest(11, ntree=8))
            out, trace = impute(t, spec)
            assert out.is_complete(), method
            assert_observed_untouched(t, out)
            if method in ("strawman", "knn"):
                assert trace is None
            else:
                assert trace is not None
            again, _ = impute(t, spec)
            assert out.equals(again), method
