"""Run a small benchmark plan and read its report.

The harness blanks cells under each (mechanism, fraction) pair, runs
every algorithm on the identical amputed table per replicate, scores
against the hidden truth, and aggregates relative errors. Reports are
deterministic given the plan seed, whatever the worker count.

    python demos/03_benchmark_study.py
"""

from rfimpute import DatasetSource, ExperimentPlan, run_plan
from rfimpute.bench import algorithm_from_dict

forest = {"ntree": 30, "nodesize": 5, "nsplit": 10}
plan = ExperimentPlan(
    datasets=[
        DatasetSource(name="weak", generator="equicorrelated",
                      generator_args={"n": 300, "p": 8, "corr": 0.1, "seed": 1}),
        DatasetSource(name="strong", generator="equicorrelated",
                      generator_args={"n": 300, "p": 8, "corr": 0.85, "seed": 2}),
    ],
    cells=[("mcar", 0.25), ("nmar", 0.25)],
    algorithms=[
        algorithm_from_dict({"method": "strawman"}),
        algorithm_from_dict({"method": "knn", "knn_k": 10}),
        algorithm_from_dict({"method": "unsv", "iterations": 5, **forest}),
        algorithm_from_dict({"method": "mforest", "alpha": 0.25,
                             "max_iterations": 5, **forest}),
    ],
    replicates=10,
    seed=2024,
    timing=True,
)

report = run_plan(plan, n_jobs=2)

print(f"{'dataset':8s} {'group':7s} {'cell':12s} {'algorithm':14s} "
      f"{'mean E_R':>9s} {'SD':>6s} {'sec':>6s}")
for row in report.rows:
    cell = f"{row.mechanism}@{row.gamma}"
    print(f"{row.dataset:8s} {row.correlation_group:7s} {cell:12s} "
          f"{row.algorithm:14s} {row.mean_e_r:9.1f} {row.sd_e_r:6.1f} "
          f"{row.mean_seconds:6.2f}")

report.to_json("/tmp/benchmark_demo.json")
report.to_csv("/tmp/benchmark_demo.csv")
print("\nwrote /tmp/benchmark_demo.json and /tmp/benchmark_demo.csv")
print("forest imputation gains the most on the strongly correlated dataset.")
print("note that E_R is relative: NMAR blanks tail cells, where the strawman")
print("median is a poor fill, so relative errors can drop even though the")
print("absolute problem got harder.")
