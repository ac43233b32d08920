import math

import numpy as np
import pytest

from rfimpute.errors import EmptyDataError, InsufficientColumnsError, ParseError
from rfimpute.table import (
    FACTOR,
    NUMERIC,
    Column,
    MixedTable,
    correlation_rho,
    dataset_stats,
    read_csv,
    read_schema_file,
    write_csv,
)

from conftest import make_numeric_table, random_mixed_table


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestReadCsv:
    def test_numeric_with_na(self, tmp_path):
        f = tmp_path / "t.csv"
        write_lines(f, ["x", "1.5", "NA", "2"])
        t = read_csv(f)
        col = t.column("x")
        assert col.kind == NUMERIC
        assert list(col.mask) == [False, True, False]
        assert col.values[0] == 1.5 and col.values[2] == 2.0

    def test_factor_levels(self, tmp_path):
        f = tmp_path / "t.csv"
        write_lines(f, ["c", "a", "b", "a"])
        col = read_csv(f).column("c")
        assert col.kind == FACTOR
        assert set(col.levels) == {"a", "b"}
        assert not col.mask.any()

    def test_mixed_column_falls_back_to_factor(self, tmp_path):
        f = tmp_path / "t.csv"
        write_lines(f, ["y", "1", "dog", "3"])
        col = read_csv(f).column("y")
        assert col.kind == FACTOR
        assert len(col.levels) == 3

    def test_empty_string_is_missing(self, tmp_path):
        f = tmp_path / "t.csv"
        write_lines(f, ["a,b", "1,", "2,x"])
        t = read_csv(f)
        assert list(t.column("b").mask) == [True, False]

    def test_ragged_rows_raise_with_row_index(self, tmp_path):
        f = tmp_path / "t.csv"
        write_lines(f, ["a,b", "1,2", "3"])
        with pytest.raises(ParseError) as err:
            read_csv(f)
        assert err.value.row == 2

    def test_empty_file_raises(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("", encoding="utf-8")
        with pytest.raises(EmptyDataError):
            read_csv(f)

    def test_schema_override(self, tmp_path):
        f = tmp_path / "t.csv"
        write_lines(f, ["x", "1", "2"])
        t = read_csv(f, schema={"x": "factor"})
        assert t.column("x").kind == FACTOR

    def test_schema_file(self, tmp_path):
        s = tmp_path / "schema.txt"
        write_lines(s, ["x=factor", "# comment", "y = numeric"])
        schema = read_schema_file(s)
        assert schema == {"x": "factor", "y": "numeric"}


class TestWriteCsv:
    def test_round_trip_exact(self, tmp_path, rng):
        t = random_mixed_table(rng, n=40, missing_rate=0.3)
        f = tmp_path / "t.csv"
        write_csv(t, f)
        back = read_csv(f)
        assert back.equals(t)

    def test_round_trip_many_random_tables(self, tmp_path, rng):
        for i in range(10):
            t = random_mixed_table(rng, n=rng.integers(1, 25),
                                   missing_rate=float(rng.random() * 0.5))
            f = tmp_path / f"t{i}.csv"
            write_csv(t, f)
            assert read_csv(f).equals(t)

    def test_missing_numeric_written_as_na(self, tmp_path):
        t = make_numeric_table({"x": [1.0, np.nan]})
        f = tmp_path / "t.csv"
        write_csv(t, f)
        lines = f.read_text().splitlines()
        assert lines[2] == "NA"

    def test_factor_with_delimiter_quoted(self, tmp_path):
        col = Column("c", FACTOR, np.array([0, 1], np.int32),
                     np.zeros(2, bool), ("a,b", "plain"))
        f = tmp_path / "t.csv"
        write_csv(MixedTable([col]), f)
        lines = f.read_text().splitlines()
        assert lines[1] == '"a,b"'
        assert read_csv(f).equals(MixedTable([col]))


class TestCorrelationRho:
    def test_two_columns_equals_abs_r(self, rng):
        x = rng.standard_normal(50)
        y = 0.6 * x - rng.standard_normal(50)
        t = make_numeric_table({"x": x, "y": y})
        r = np.corrcoef(x, y)[0, 1]
        assert correlation_rho(t) == pytest.approx(abs(r), abs=1e-12)

    def test_duplicated_column_gives_one(self, rng):
        x = rng.standard_normal(30)
        t = make_numeric_table({"x": x, "y": x.copy()})
        assert correlation_rho(t) == pytest.approx(1.0, abs=1e-12)

    def test_independent_columns_near_zero(self):
        rng = np.random.default_rng(7)
        t = make_numeric_table({f"x{j}": rng.standard_normal(10000) for j in range(3)})
        assert correlation_rho(t) < 0.05

    def test_matches_bruteforce_oracle(self, rng):
        # direct transliteration: C(p,2)^-1 sum_j sqrt(sum_{k<j} r_kj^2)
        for _ in range(20):
            p = int(rng.integers(2, 8))
            n = int(rng.integers(5, 40))
            t = make_numeric_table(
                {f"x{j}": rng.standard_normal(n) for j in range(p)})
            cols = [t.columns[j].values for j in range(p)]
            total = 0.0
            for j in range(p):
                ssq = 0.0
                for k in range(j):
                    ssq += np.corrcoef(cols[k], cols[j])[0, 1] ** 2
                total += math.sqrt(ssq)
            expected = total / math.comb(p, 2)
            assert correlation_rho(t) == pytest.approx(expected, abs=1e-10)

    def test_row_permutation_invariance(self, rng):
        t = random_mixed_table(rng, n=40, n_factor=0, missing_rate=0.2)
        perm = rng.permutation(40)
        permuted = MixedTable([
            Column(c.name, c.kind, c.values[perm], c.mask[perm], c.levels)
            for c in t.columns
        ])
        assert correlation_rho(permuted) == pytest.approx(correlation_rho(t), rel=1e-12)

    def test_affine_rescale_invariance(self, rng):
        t = random_mixed_table(rng, n=40, n_factor=0, missing_rate=0.1)
        before = correlation_rho(t)
        c0 = t.columns[0]
        scaled = Column(c0.name, NUMERIC, c0.values * 7.5 - 3.0, c0.mask)
        t2 = MixedTable([scaled] + [c.copy() for c in t.columns[1:]])
        assert correlation_rho(t2) == pytest.approx(before, rel=1e-10)

    def test_complete_pairs_deletion(self, rng):
        x = rng.standard_normal(60)
        y = x + 0.1 * rng.standard_normal(60)
        xm = x.copy()
        xm[:10] = np.nan
        t = make_numeric_table({"x": xm, "y": y})
        r = np.corrcoef(x[10:], y[10:])[0, 1]
        assert correlation_rho(t) == pytest.approx(abs(r), abs=1e-12)

    def test_too_few_columns_raises(self, rng):
        t = make_numeric_table({"x": rng.standard_normal(10)})
        with pytest.raises(InsufficientColumnsError):
            correlation_rho(t)

    def test_constant_column_excluded_with_warning(self, rng):
        t = make_numeric_table({
            "x": rng.standard_normal(20),
            "y": rng.standard_normal(20),
            "const": np.ones(20),
        })
        with pytest.warns(UserWarning):
            rho = correlation_rho(t)
        r = np.corrcoef(t.columns[0].values, t.columns[1].values)[0, 1]
        assert rho == pytest.approx(abs(r), abs=1e-12)


class TestDatasetStats:
    def test_log_information(self, rng):
        t = make_numeric_table({f"x{j}": rng.standard_normal(100) for j in range(10)})
        st = dataset_stats(t)
        assert st.info == pytest.approx(1.0)
        assert st.complexity == pytest.approx(3.0)

    def test_negative_information(self, rng):
        # n=10, p=1000 -> info = -2
        cols = {f"x{j}": rng.standard_normal(10) for j in range(1000)}
        st = dataset_stats(make_numeric_table(cols))
        assert st.info == pytest.approx(-2.0)

    def test_single_cell(self):
        t = make_numeric_table({"x": [1.0]})
        st = dataset_stats(t)
        assert st.info == 0.0
        assert st.complexity == 0.0
        assert st.rho is None
