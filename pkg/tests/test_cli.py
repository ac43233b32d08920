import json

from rfimpute.cli import main
from rfimpute.table import read_csv
from rfimpute.bench import simulate_regression_benchmark


def test_simulate_writes_csv(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--n", "40", "--seed", "3", "--out", str(out)]) == 0
    t = read_csv(out)
    assert t.shape == (40, 11)
    assert t.equals(simulate_regression_benchmark(40, seed=3))


def test_ampute_impute_round_trip(tmp_path):
    src = tmp_path / "src.csv"
    amp = tmp_path / "amp.csv"
    mask = tmp_path / "mask.csv"
    filled = tmp_path / "filled.csv"
    trace = tmp_path / "trace.json"
    main(["simulate", "--n", "60", "--seed", "1", "--out", str(src)])
    assert main(["ampute", "--mechanism", "mcar", "--gamma", "0.25",
                 "--seed", "2", "--in", str(src), "--out", str(amp),
                 "--mask", str(mask)]) == 0
    amputed = read_csv(amp)
    assert amputed.n_missing() == round(0.25 * 60 * 11)
    mask_rows = mask.read_text().splitlines()
    assert len(mask_rows) == 61

    assert main(["impute", "--algorithm", "unsv", "--iterations", "2",
                 "--ntree", "10", "--nodesize", "4", "--seed", "5",
                 "--in", str(amp), "--out", str(filled),
                 "--trace", str(trace)]) == 0
    done = read_csv(filled)
    assert done.is_complete()
    payload = json.loads(trace.read_text())
    assert payload["stop_reason"] == "iterations_exhausted"
    assert len(payload["iterations"]) == 2


def test_impute_all_algorithms(tmp_path):
    src = tmp_path / "src.csv"
    amp = tmp_path / "amp.csv"
    main(["simulate", "--n", "40", "--seed", "7", "--out", str(src)])
    main(["ampute", "--mechanism", "nmar", "--gamma", "0.2", "--seed", "8",
          "--in", str(src), "--out", str(amp)])
    for algorithm in ("strawman", "prxR", "otf", "mforest", "knn"):
        out = tmp_path / f"{algorithm}.csv"
        code = main(["impute", "--algorithm", algorithm, "--ntree", "5",
                     "--nodesize", "5", "--max-iterations", "2",
                     "--alpha", "0.3", "--seed", "1",
                     "--in", str(amp), "--out", str(out)])
        assert code == 0
        assert read_csv(out).is_complete()


def test_impute_with_response_flag(tmp_path):
    src = tmp_path / "src.csv"
    amp = tmp_path / "amp.csv"
    out = tmp_path / "out.csv"
    main(["simulate", "--n", "50", "--seed", "2", "--out", str(src)])
    main(["ampute", "--mechanism", "mcar", "--gamma", "0.25", "--seed", "3",
          "--in", str(src), "--out", str(amp)])
    assert main(["impute", "--algorithm", "otf", "--response", "Y",
                 "--ntree", "8", "--nodesize", "4", "--seed", "4",
                 "--in", str(amp), "--out", str(out)]) == 0
    assert read_csv(out).is_complete()


def test_bench_subcommand(tmp_path):
    plan = {
        "seed": 3,
        "replicates": 2,
        "timing": False,
        "datasets": [{"name": "sim", "generator": "regression_benchmark",
                      "generator_args": {"n": 50, "seed": 1}, "response": "Y"}],
        "cells": [{"mechanism": "mcar", "gamma": 0.25}],
        "algorithms": [{"method": "strawman"},
                       {"method": "knn", "knn_k": 3}],
    }
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(plan))
    out = tmp_path / "report.json"
    csv_out = tmp_path / "report.csv"
    assert main(["bench", "--plan", str(plan_path), "--out", str(out),
                 "--csv", str(csv_out)]) == 0
    report = json.loads(out.read_text())
    assert report["schema_version"] == 1
    strawman_rows = [r for r in report["rows"] if r["algorithm"] == "strawman"]
    assert strawman_rows[0]["mean_e_r"] == 100.0
    assert csv_out.read_text().startswith("dataset,")


def test_bench_determinism_bytes(tmp_path):
    plan = {
        "seed": 11,
        "replicates": 2,
        "timing": False,
        "datasets": [{"name": "sim", "generator": "regression_benchmark",
                      "generator_args": {"n": 40, "seed": 1}}],
        "cells": [["mcar", 0.25]],
        "algorithms": [{"method": "strawman"}, {"method": "knn"}],
    }
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(plan))
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    main(["bench", "--plan", str(plan_path), "--out", str(out1)])
    main(["bench", "--plan", str(plan_path), "--out", str(out2), "--n-jobs", "2"])
    assert out1.read_bytes() == out2.read_bytes()


def test_error_reporting(tmp_path, capsys):
    src = tmp_path / "src.csv"
    src.write_text("x\n1\n2\n")
    out = tmp_path / "out.csv"
    code = main(["ampute", "--mechanism", "mar", "--gamma", "0.5",
                 "--in", str(src), "--out", str(out)])
    assert code == 2
    assert "error:" in capsys.readouterr().err
