"""Command line front end: simulate, ampute, impute, bench."""

from __future__ import annotations

import argparse
import json
import sys

from .ampute import MissingnessSpec, induce
from .bench import load_plan, run_plan, simulate_regression_benchmark
from .errors import RfImputeError
from .forest import ForestConfig
from .impute import ImputeSpec, impute
from .table import read_csv, read_schema_file, write_csv

ALGORITHMS = ("strawman", "prx", "prxR", "otf", "otfR", "unsv", "mforest", "knn")


def _add_impute_parser(sub):
    p = sub.add_parser("impute", help="fill missing cells of a CSV file")
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.25,
                   help="mforest group fraction of columns")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--max-iterations", type=int, default=10)
    p.add_argument("--knn-k", type=int, default=10)
    p.add_argument("--rowmax", type=float, default=1.0)
    p.add_argument("--colmax", type=float, default=1.0)
    p.add_argument("--ntree", type=int, default=100)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--nsplit", type=int, default=10)
    p.add_argument("--nodesize", type=int, default=1)
    p.add_argument("--ytry", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--response", default=None,
                   help="response column for supervised otf splitting")
    p.add_argument("--schema", default=None,
                   help="file of column_name=numeric|factor overrides")
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--trace", default=None, help="write iteration trace JSON here")


def _cmd_impute(args):
    schema = read_schema_file(args.schema) if args.schema else None
    table = read_csv(args.infile, schema=schema)
    forest = ForestConfig(ntree=args.ntree, mtry=args.mtry, nodesize=args.nodesize,
                          nsplit=args.nsplit, ytry=args.ytry, seed=args.seed)
    spec = ImputeSpec(
        method=args.algorithm, iterations=args.iterations, alpha=args.alpha,
        epsilon=args.epsilon, max_iterations=args.max_iterations,
        knn_k=args.knn_k, rowmax=args.rowmax, colmax=args.colmax, forest=forest)
    completed, trace = impute(table, spec, response=args.response,
                              n_jobs=args.n_jobs)
    write_csv(completed, args.outfile)
    if args.trace:
        payload = trace.to_json_dict() if trace else {"stop_reason": None,
                                                      "iterations": []}
        with open(args.trace, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def _add_ampute_parser(sub):
    p = sub.add_parser("ampute", help="induce missingness into a complete CSV")
    p.add_argument("--mechanism", required=True, choices=("mcar", "mar", "nmar"))
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schema", default=None)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--mask", default=None, help="write the 0/1 indicator CSV here")


def _cmd_ampute(args):
    schema = read_schema_file(args.schema) if args.schema else None
    table = read_csv(args.infile, schema=schema)
    amputed, mask = induce(table, MissingnessSpec(args.mechanism, args.gamma,
                                                  seed=args.seed))
    write_csv(amputed, args.outfile)
    if args.mask:
        mask.save_csv(args.mask)
    return 0


def _add_bench_parser(sub):
    p = sub.add_parser("bench", help="run an experiment plan")
    p.add_argument("--plan", required=True, help="JSON plan file")
    p.add_argument("--out", default=None, help="report JSON path")
    p.add_argument("--csv", default=None, help="report CSV path")
    p.add_argument("--n-jobs", type=int, default=1)


def _cmd_bench(args):
    plan = load_plan(args.plan)
    report = run_plan(plan, n_jobs=args.n_jobs)
    if args.out:
        report.to_json(args.out)
    if args.csv:
        report.to_csv(args.csv)
    if not args.out and not args.csv:
        json.dump(report.to_json_dict(), sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    return 0


def _add_simulate_parser(sub):
    p = sub.add_parser("simulate", help="write a synthetic regression table")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sd", type=float, default=0.5)
    p.add_argument("--out", dest="outfile", required=True)


def _cmd_simulate(args):
    write_csv(simulate_regression_benchmark(args.n, seed=args.seed, noise_sd=args.noise_sd),
              args.outfile)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rfimpute",
        description="Random-forest missing-data imputation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_impute_parser(sub)
    _add_ampute_parser(sub)
    _add_bench_parser(sub)
    _add_simulate_parser(sub)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"impute": _cmd_impute, "ampute": _cmd_ampute,
                "bench": _cmd_bench, "simulate": _cmd_simulate}
    try:
        return handlers[args.command](args)
    except RfImputeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
