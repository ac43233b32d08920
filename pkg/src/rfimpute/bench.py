"""Benchmark harness: mechanism x fraction grids over datasets.

A plan names datasets (CSV files or built-in generators), a list of
(mechanism, gamma) cells, the algorithms to compare, and a replicate
count. Every replicate blanks the same cells for every algorithm, so
relative errors are paired; the strawman baseline is computed per
replicate. Reports carry the per-cell mean and SD of relative error,
wall-clock timings (optional), dataset summary statistics, and a
low/medium/high correlation grouping.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from .ampute import MissingnessSpec, induce
from .errors import RfImputeError
from .forest import ForestConfig
from .impute import ImputeSpec, impute, strawman
from .metrics import relative_error, score
from .table import Column, MixedTable, NUMERIC, dataset_stats, read_csv

REPORT_SCHEMA_VERSION = 1


def stable_seed(*parts):
    """Deterministic 32-bit seed from arbitrary labels (not salted)."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:4], "big")


def simulate_regression_benchmark(n, seed=0, noise_sd=0.5):
    """Synthetic regression table: ten predictors and a response.

    Two predictor pairs are bivariate normal with correlation 0.96
    (means 3, SD 3); the remaining normals are N(1, 1), N(3, 4) and the
    exponentials have mean 0.5. The response is
    ``Y = X1 + X2 + X3 + X4 + eps`` with ``eps ~ N(0, noise_sd)``.
    Normal parameters are read as (mean, SD).
    """
    rng = np.random.default_rng(seed)

    def bvn_pair(mean, sd, corr):
        z1 = rng.standard_normal(n)
        z2 = rng.standard_normal(n)
        a = mean + sd * z1
        b = mean + sd * (corr * z1 + np.sqrt(1.0 - corr**2) * z2)
        return a, b

    x1, x2 = bvn_pair(3.0, 3.0, 0.96)
    x5, x6 = bvn_pair(3.0, 3.0, 0.96)
    x3 = 1.0 + rng.standard_normal(n)
    x10 = 1.0 + rng.standard_normal(n)
    x8 = 3.0 + 4.0 * rng.standard_normal(n)
    x4 = rng.exponential(0.5, n)
    x7 = rng.exponential(0.5, n)
    x9 = rng.exponential(0.5, n)
    eps = noise_sd * rng.standard_normal(n)
    y = x1 + x2 + x3 + x4 + eps

    data = {"X1": x1, "X2": x2, "X3": x3, "X4": x4, "X5": x5, "X6": x6,
            "X7": x7, "X8": x8, "X9": x9, "X10": x10, "Y": y}
    cols = [Column(name, NUMERIC, vals, np.zeros(n, bool))
            for name, vals in data.items()]
    return MixedTable(cols, provenance=f"regression_benchmark(n={n},seed={seed})")


def simulate_equicorrelated(n, p, corr, seed=0):
    """p standard-normal columns with a common pairwise correlation."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, p))
    if corr != 0.0:
        shared = rng.standard_normal(n)
        z = np.sqrt(corr) * shared[:, None] + np.sqrt(1.0 - corr) * z
    cols = [Column(f"x{j + 1}", NUMERIC, z[:, j], np.zeros(n, bool))
            for j in range(p)]
    return MixedTable(cols, provenance=f"equicorrelated(n={n},p={p},corr={corr})")


GENERATORS = {
    "regression_benchmark": simulate_regression_benchmark,
    "equicorrelated": simulate_equicorrelated,
}


@dataclass
class DatasetSource:
    """A named table: a CSV path, a generator call, or an in-memory table."""

    name: str
    path: str | None = None
    generator: str | None = None
    generator_args: dict = field(default_factory=dict)
    table: MixedTable | None = None
    response: str | None = None

    def load(self):
        if self.table is not None:
            return self.table
        if self.path is not None:
            return read_csv(self.path)
        if self.generator is not None:
            if self.generator not in GENERATORS:
                raise RfImputeError(f"unknown generator {self.generator!r}")
            return GENERATORS[self.generator](**self.generator_args)
        raise RfImputeError(f"dataset {self.name!r} has no source")


@dataclass
class ExperimentPlan:
    datasets: list
    cells: list  # (mechanism, gamma) pairs
    algorithms: list  # (label, ImputeSpec) pairs
    replicates: int = 1
    seed: int = 0
    timing: bool = True

    def validate(self):
        if self.replicates < 1:
            raise RfImputeError("replicates must be >= 1")
        if not self.cells:
            raise RfImputeError("plan needs at least one (mechanism, gamma) cell")
        if not self.datasets or not self.algorithms:
            raise RfImputeError("plan needs datasets and algorithms")
        labels = [label for label, _ in self.algorithms]
        if len(set(labels)) != len(labels):
            raise RfImputeError("algorithm labels must be unique")


@dataclass
class BenchRow:
    dataset: str
    mechanism: str
    gamma: float
    algorithm: str
    n_ok: int
    n_fail: int
    mean_e_r: float | None
    sd_e_r: float | None
    mean_seconds: float | None
    correlation_group: str = "unlabeled"
    failures: list = field(default_factory=list)


@dataclass
class BenchReport:
    rows: list
    dataset_stats: dict  # name -> {"rho": .., "info": .., "complexity": ..}
    plan_seed: int
    replicates: int
    timing: bool

    def to_json_dict(self):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "plan_seed": self.plan_seed,
            "replicates": self.replicates,
            "dataset_stats": self.dataset_stats,
            "rows": [
                {
                    "dataset": r.dataset,
                    "mechanism": r.mechanism,
                    "gamma": r.gamma,
                    "algorithm": r.algorithm,
                    "n_ok": r.n_ok,
                    "n_fail": r.n_fail,
                    "mean_e_r": r.mean_e_r,
                    "sd_e_r": r.sd_e_r,
                    **({"mean_seconds": r.mean_seconds} if self.timing else {}),
                    "correlation_group": r.correlation_group,
                    "failures": r.failures,
                }
                for r in self.rows
            ],
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    def to_csv(self, path):
        fields = ["dataset", "mechanism", "gamma", "algorithm", "n_ok", "n_fail",
                  "mean_e_r", "sd_e_r"]
        if self.timing:
            fields.append("mean_seconds")
        fields += ["correlation_group", "rho", "info", "complexity"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            for r in self.rows:
                stats = self.dataset_stats[r.dataset]
                row = [r.dataset, r.mechanism, r.gamma, r.algorithm, r.n_ok,
                       r.n_fail, r.mean_e_r, r.sd_e_r]
                if self.timing:
                    row.append(r.mean_seconds)
                row += [r.correlation_group, stats["rho"], stats["info"],
                        stats["complexity"]]
                writer.writerow(row)

    def row(self, dataset, mechanism, gamma, algorithm):
        for r in self.rows:
            if (r.dataset == dataset and r.mechanism == mechanism
                    and r.gamma == gamma and r.algorithm == algorithm):
                return r
        raise KeyError((dataset, mechanism, gamma, algorithm))


def _run_replicate(truth, response, mechanism, gamma, rep_seed, algorithms,
                   timing, n_jobs):
    """One replicate: ampute once, run every algorithm on the same table."""
    out = {}
    try:
        amputed, mask = induce(truth, MissingnessSpec(mechanism, gamma, seed=rep_seed))
        baseline = score(truth, strawman(amputed, seed=stable_seed(rep_seed, "strawman")),
                         mask)
    except RfImputeError as exc:
        for label, _ in algorithms:
            out[label] = ("fail", f"replicate setup: {exc}")
        return out
    for label, spec in algorithms:
        run_spec = replace(spec, forest=replace(
            spec.forest, seed=stable_seed(rep_seed, label)))
        try:
            t0 = time.perf_counter()
            completed, _ = impute(amputed, run_spec, response=response, n_jobs=n_jobs)
            seconds = time.perf_counter() - t0
            e_r = relative_error(score(truth, completed, mask), baseline)
            out[label] = ("ok", e_r, seconds if timing else None)
        except RfImputeError as exc:
            out[label] = ("fail", str(exc))
    return out


def run_plan(plan, n_jobs=1):
    """Execute a plan; deterministic given its seed, whatever ``n_jobs`` is.

    Replicates run in parallel across a worker pool; every run derives
    its own seed from (plan seed, dataset, cell, replicate), so partial
    plans reproduce exactly.
    """
    plan.validate()
    tables = {}
    stats = {}
    for ds in plan.datasets:
        table = ds.load()
        if not table.is_complete():
            raise RfImputeError(f"dataset {ds.name!r} must be complete")
        tables[ds.name] = table
        st = dataset_stats(table)
        stats[ds.name] = {"rho": st.rho, "info": st.info, "complexity": st.complexity}

    jobs = []
    for ds in plan.datasets:
        for mechanism, gamma in plan.cells:
            for rep in range(plan.replicates):
                rep_seed = stable_seed(plan.seed, ds.name, mechanism, gamma, rep)
                jobs.append((ds, mechanism, gamma, rep_seed))

    if n_jobs == 1:
        results = [
            _run_replicate(tables[ds.name], ds.response, mech, gamma, rep_seed,
                           plan.algorithms, plan.timing, 1)
            for ds, mech, gamma, rep_seed in jobs
        ]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_replicate)(tables[ds.name], ds.response, mech, gamma,
                                    rep_seed, plan.algorithms, plan.timing, 1)
            for ds, mech, gamma, rep_seed in jobs
        )

    by_cell = {}
    for (ds, mech, gamma, _), result in zip(jobs, results):
        for label, outcome in result.items():
            key = (ds.name, mech, gamma, label)
            bucket = by_cell.setdefault(key, {"e_r": [], "sec": [], "fail": []})
            if outcome[0] == "ok":
                bucket["e_r"].append(outcome[1])
                if outcome[2] is not None:
                    bucket["sec"].append(outcome[2])
            else:
                bucket["fail"].append(outcome[1])

    rows = []
    for ds in plan.datasets:
        for mechanism, gamma in plan.cells:
            for label, _ in plan.algorithms:
                bucket = by_cell[(ds.name, mechanism, gamma, label)]
                ers = bucket["e_r"]
                rows.append(BenchRow(
                    dataset=ds.name,
                    mechanism=mechanism,
                    gamma=gamma,
                    algorithm=label,
                    n_ok=len(ers),
                    n_fail=len(bucket["fail"]),
                    mean_e_r=float(np.mean(ers)) if ers else None,
                    sd_e_r=float(np.std(ers, ddof=1)) if len(ers) >= 2 else None,
                    mean_seconds=(float(np.mean(bucket["sec"]))
                                  if plan.timing and bucket["sec"] else None),
                    failures=bucket["fail"],
                ))
    report = BenchReport(rows=rows, dataset_stats=stats, plan_seed=plan.seed,
                         replicates=plan.replicates, timing=plan.timing)
    return correlation_groups(report)


def correlation_groups(report, cutpoints=(50.0, 75.0)):
    """Label datasets low/medium/high by the percentile rank of their rho.

    The rank of a dataset is the percentage of datasets (itself
    included) with rho no larger than its own; ranks at or below the
    first cutpoint are "low", at or below the second "medium", the rest
    "high". Datasets without a defined rho stay "unlabeled".
    """
    lo_cut, hi_cut = cutpoints
    rhos = {name: st["rho"] for name, st in report.dataset_stats.items()
            if st["rho"] is not None}
    labels = {}
    values = list(rhos.values())
    for name, rho in rhos.items():
        rank = 100.0 * sum(1 for v in values if v <= rho) / len(values)
        if rank <= lo_cut:
            labels[name] = "low"
        elif rank <= hi_cut:
            labels[name] = "medium"
        else:
            labels[name] = "high"
    for row in report.rows:
        row.correlation_group = labels.get(row.dataset, "unlabeled")
    for name, st in report.dataset_stats.items():
        st["correlation_group"] = labels.get(name, "unlabeled")
    return report


_FOREST_KEYS = ("ntree", "mtry", "nodesize", "nsplit", "ytry", "seed", "bootstrap")
_SPEC_KEYS = ("iterations", "alpha", "epsilon", "max_iterations", "knn_k",
              "rowmax", "colmax")


def algorithm_from_dict(entry):
    """Build (label, ImputeSpec) from a flat JSON plan entry."""
    method = entry["method"]
    forest_kwargs = {k: entry[k] for k in _FOREST_KEYS if k in entry and entry[k] is not None}
    spec_kwargs = {k: entry[k] for k in _SPEC_KEYS if k in entry and entry[k] is not None}
    spec = ImputeSpec(method=method, forest=ForestConfig(**forest_kwargs), **spec_kwargs)
    label = entry.get("label") or default_label(spec)
    return label, spec


def default_label(spec):
    label = spec.method
    if spec.method in ("prx", "prxR", "otf", "otfR", "unsv") and spec.iterations > 1:
        label += f".{spec.iterations}"
    if spec.method == "mforest":
        label += f"_a{spec.alpha:g}"
    return label


def plan_from_dict(d):
    datasets = []
    for entry in d["datasets"]:
        datasets.append(DatasetSource(
            name=entry["name"],
            path=entry.get("path"),
            generator=entry.get("generator"),
            generator_args=entry.get("generator_args", {}),
            response=entry.get("response"),
        ))
    cells = [(c["mechanism"].lower(), float(c["gamma"])) if isinstance(c, dict)
             else (str(c[0]).lower(), float(c[1])) for c in d["cells"]]
    algorithms = [algorithm_from_dict(e) for e in d["algorithms"]]
    return ExperimentPlan(
        datasets=datasets,
        cells=cells,
        algorithms=algorithms,
        replicates=int(d.get("replicates", 1)),
        seed=int(d.get("seed", 0)),
        timing=bool(d.get("timing", True)),
    )


def load_plan(path):
    with open(path, encoding="utf-8") as fh:
        return plan_from_dict(json.load(fh))


def table_one_cells():
    """The nine-cell mechanism x fraction grid of the large-scale design."""
    return [(mech, gamma)
            for mech in ("mcar", "mar", "nmar")
            for gamma in (0.25, 0.50, 0.75)]
