"""Command-line front end: solve, generate, verify, and bench.

Exit codes: 0 solved (optimal or feasible), 2 infeasible (or a solution
that fails verification), 3 time limit hit, 4 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bnc, fileio
from .formulation import (DependentPrizes, LAZY, OFF, TIE_COST, TIE_LEX,
                          UPFRONT)
from .instance import (Instance, InvalidInstance, KINDS, check_solution,
                       generate, random_instance)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_TIME_LIMIT = 3
EXIT_USAGE = 4

_STATUS_EXIT = {"optimal": EXIT_OK, "feasible": EXIT_OK,
                "infeasible": EXIT_INFEASIBLE, "time_limit": EXIT_TIME_LIMIT}

_THREADS_ENV = "BPCCSP_THREADS"


@dataclass
class RunRecord:
    """One solve in a bench run (append-only)."""
    instance: str
    method: str
    status: str
    objective: float
    bound: float
    wall_time: float
    nodes: int
    cuts: dict


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2; usage errors here must be 4."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(_THREADS_ENV, "1")))
    except ValueError:
        return 1


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True,
                   help="base file (coordinate format), instance file "
                        "(.json), or random:n=<K>")
    p.add_argument("--subgraph", choices=KINDS, default="tour")
    p.add_argument("--budget-frac", type=float, default=0.5)
    p.add_argument("--radius-frac", type=float, default=1.0)
    p.add_argument("--capacity-frac", type=float, default=0.02)
    p.add_argument("--coverage-ratio", type=float, default=0.5)
    p.add_argument("--integer-costs", action="store_true")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for random:n=<K> inputs")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=bnc.METHODS, default=bnc.BNC)
    p.add_argument("--time-limit", type=float, default=3600.0)
    p.add_argument("--symmetry", choices=(UPFRONT, LAZY, OFF), default=None,
                   help="default: upfront for trees, lazy for tours")
    p.add_argument("--tie-break", choices=(TIE_LEX, TIE_COST),
                   default=TIE_LEX)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--progress", action="store_true",
                   help="stream progress lines to stderr")


def _load_instance(args) -> Instance:
    spec = args.input
    if spec.startswith("random:"):
        fields = dict(part.split("=", 1) for part in
                      spec[len("random:"):].split(",") if part)
        if set(fields) != {"n"}:
            raise ValueError("random inputs take the form random:n=<K>")
        rng = np.random.default_rng(args.seed)
        return random_instance(
            rng, int(fields["n"]), args.subgraph,
            budget_frac=args.budget_frac, radius_frac=args.radius_frac,
            capacity_frac=args.capacity_frac,
            coverage_ratio=args.coverage_ratio)
    with open(spec, "r", encoding="utf-8") as fh:
        head = fh.read(1)
    if head == "{":
        return fileio.read_instance(spec)
    base = fileio.read_base(spec)
    return generate(base, args.subgraph, args.budget_frac, args.radius_frac,
                    args.capacity_frac, args.coverage_ratio,
                    integer_costs=args.integer_costs)


def _emit(text: str, output) -> None:
    if output and output != "-":
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _solver_config(args, method=None) -> bnc.SolverConfig:
    log = (lambda line: print(line, file=sys.stderr)) if args.progress \
        else None
    return bnc.SolverConfig(
        method=method or args.method, time_limit=args.time_limit,
        symmetry=args.symmetry, tie_break=args.tie_break,
        deterministic=args.deterministic, threads=args.threads, log=log)


def cmd_solve(args) -> int:
    inst = _load_instance(args)
    if args.method == bnc.BENDERS and not inst.independent_coverage_prizes():
        print("error: independent prizes required for the decomposition "
              "method", file=sys.stderr)
        return EXIT_USAGE
    sol = bnc.solve(inst, _solver_config(args))
    if args.json:
        text = json.dumps(fileio.solution_to_dict(sol, inst), indent=1) + "\n"
    else:
        text = fileio.write_solution(sol, inst)
    _emit(text, args.output)
    return _STATUS_EXIT[sol.status]


def cmd_generate(args) -> int:
    inst = _load_instance(args)
    if args.output and args.output != "-":
        fileio.write_instance(inst, args.output)
    else:
        sys.stdout.write(
            json.dumps(fileio.instance_to_dict(inst), indent=1) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = fileio.read_instance(args.instance)
    with open(args.solution, "r", encoding="utf-8") as fh:
        sol = fileio.read_solution(fh.read())
    errors = check_solution(inst, sol)
    if errors:
        for err in errors:
            print(f"violation: {err}")
        return EXIT_INFEASIBLE
    print("solution verified")
    return EXIT_OK


# -- bench ------------------------------------------------------------------


def _bench_instance(job: dict, manifest_dir: str) -> Instance:
    spec = job["base"]
    if spec.startswith("random:"):
        fields = dict(part.split("=", 1) for part in
                      spec[len("random:"):].split(",") if part)
        if set(fields) != {"n"}:
            raise ValueError("random bases take the form random:n=<K>")
        rng = np.random.default_rng(int(job.get("seed", 0)))
        return random_instance(
            rng, int(fields["n"]), job["subgraph"],
            budget_frac=job["budget-frac"], radius_frac=job["radius-frac"],
            capacity_frac=job["capacity-frac"],
            coverage_ratio=job["coverage-ratio"])
    path = spec if os.path.isabs(spec) else os.path.join(manifest_dir, spec)
    base = fileio.read_base(path)
    return generate(base, job["subgraph"], job["budget-frac"],
                    job["radius-frac"], job["capacity-frac"],
                    job["coverage-ratio"],
                    integer_costs=job.get("integer-costs", "no") == "yes")


def _run_job(job: dict, manifest_dir: str, args) -> list:
    inst = _bench_instance(job, manifest_dir)
    records = []
    for method in (bnc.BNC, bnc.BENDERS):
        cfg = bnc.SolverConfig(
            method=method, time_limit=job.get("time-limit", args.time_limit),
            deterministic=args.deterministic, threads=args.threads)
        sol = bnc.solve(inst, cfg)
        cuts = {k[len("cuts_"):]: v for k, v in sol.stats.items()
                if k.startswith("cuts_")}
        records.append(RunRecord(
            instance=inst.name, method=method, status=sol.status,
            objective=sol.objective, bound=sol.bound,
            wall_time=sol.stats["wall_time"], nodes=sol.stats["nodes"],
            cuts=cuts))
    return [(job, inst.budget, records)]


def _phi(bnc_rec: RunRecord, ben_rec: RunRecord) -> float | None:
    """CPU-time ratio decomposition/branch-and-cut; None when neither solved."""
    bnc_ok = bnc_rec.status == "optimal"
    ben_ok = ben_rec.status == "optimal"
    if bnc_ok and ben_ok:
        return ben_rec.wall_time / bnc_rec.wall_time if bnc_rec.wall_time \
            else 1.0
    if ben_ok:
        return 0.0
    if bnc_ok:
        return math.inf
    return None


def _mean(values) -> object:
    values = list(values)
    return sum(values) / len(values) if values else "-"


def bench_report(results) -> str:
    """Per-instance rows, grouped means over solved runs, and ratio buckets."""
    detail_rows = []
    groups: dict = {}
    phis = []
    for job, budget, records in results:
        for rec in records:
            detail_rows.append((rec.instance, rec.method, rec.status,
                                rec.objective, rec.bound, rec.wall_time,
                                rec.nodes))
        by_method = {rec.method: rec for rec in records}
        key = (job["base"], job["subgraph"], job["budget-frac"], budget)
        groups.setdefault(key, []).append(by_method)
        phi = _phi(by_method[bnc.BNC], by_method[bnc.BENDERS])
        if phi is not None:
            phis.append(phi)

    group_rows = []
    for key in sorted(groups, key=str):
        base, kind, frac, budget = key
        row = [f"{base}|{kind}", f"{frac:g}", budget]
        for method in (bnc.BNC, bnc.BENDERS):
            solved = [bm[method] for bm in groups[key]
                      if bm[method].status == "optimal"]
            row += [len(solved),
                    _mean(r.wall_time for r in solved),
                    _mean(float(r.nodes) for r in solved)]
        group_rows.append(row)

    buckets = [
        ("phi<0.9", sum(1 for p in phis if p > 0 and p < 0.9)),
        ("0.9<=phi<=1.1", sum(1 for p in phis
                              if 0.9 <= p <= 1.1 and math.isfinite(p))),
        ("phi>1.1", sum(1 for p in phis if 1.1 < p < math.inf)),
        ("phi=0", sum(1 for p in phis if p == 0.0)),
        ("phi=inf", sum(1 for p in phis if p == math.inf)),
    ]

    parts = [
        "# runs",
        fileio.format_table(
            ("instance", "method", "status", "objective", "bound",
             "cpu", "nodes"), detail_rows),
        "# groups (means over solved runs)",
        fileio.format_table(
            ("group", "budget-frac", "budget",
             "bnc-solved", "bnc-cpu", "bnc-nodes",
             "benders-solved", "benders-cpu", "benders-nodes"), group_rows),
        "# cpu-ratio buckets",
        fileio.format_table(("bucket", "count"), buckets),
    ]
    return "\n".join(parts)


def cmd_bench(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        jobs = fileio.parse_manifest(fh.read())
    manifest_dir = os.path.dirname(os.path.abspath(args.manifest))
    results = []
    if args.parallel_instances > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=args.parallel_instances) as pool:
            for chunk in pool.map(
                    lambda j: _run_job(j, manifest_dir, args), jobs):
                results.extend(chunk)
    else:
        for job in jobs:
            results.extend(_run_job(job, manifest_dir, args))
    _emit(bench_report(results), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bpccsp",
                     description="Exact solvers for budgeted prize-collecting "
                                 "covering subgraph problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    _add_instance_flags(p)
    _add_solver_flags(p)
    p.add_argument("--output", default=None, help="report path (default stdout)")
    p.add_argument("--json", action="store_true",
                   help="emit the report as JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="derive an instance and write it out")
    _add_instance_flags(p)
    p.add_argument("--output", default=None,
                   help="instance path (default stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="check a solution report")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run a manifest with both methods")
    p.add_argument("manifest")
    p.add_argument("--time-limit", type=float, default=3600.0)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--parallel-instances", type=int, default=1)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (fileio.ParseError, InvalidInstance, DependentPrizes,
            ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
