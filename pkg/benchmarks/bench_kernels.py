"""Compare the compiled kernels against the numpy fallback.

Runs the same workload twice in subprocesses (one with ``BPCCSP_PURE=1``)
so each process binds its kernel implementation cleanly at import time,
then prints a speedup table.

    python3 benchmarks/bench_kernels.py [--hk-n 16] [--mst-n 400]
                                        [--lp-count 40] [--repeat 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _workload(args) -> dict:
    import numpy as np

    from bpccsp import kernels
    from bpccsp.formulation import build_compact
    from bpccsp.instance import random_instance
    from bpccsp.lp_engine import solve_lp

    rng = np.random.default_rng(20260814)
    out = {"compiled": kernels.COMPILED}

    d = rng.uniform(1.0, 100.0, size=(args.hk_n, args.hk_n))
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    best = None
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        kernels.held_karp_table(d)
        best = min(best or 1e9, time.perf_counter() - t0)
    out["held_karp_s"] = best

    d = rng.uniform(1.0, 100.0, size=(args.mst_n, args.mst_n))
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    best = None
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        kernels.mst_cost(d)
        best = min(best or 1e9, time.perf_counter() - t0)
    out["mst_s"] = best

    models = []
    for i in range(args.lp_count):
        inst = random_instance(rng, 9 + i % 4, ("tour", "tree")[i % 2],
                               capacity=2)
        models.append(build_compact(inst).model)
    t0 = time.perf_counter()
    for model in models:
        solve_lp(model)
    out["lp_batch_s"] = time.perf_counter() - t0
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--hk-n", type=int, default=16)
    parser.add_argument("--mst-n", type=int, default=400)
    parser.add_argument("--lp-count", type=int, default=40)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.worker:
        print(json.dumps(_workload(args)))
        return 0

    results = {}
    for label, pure in (("compiled", ""), ("fallback", "1")):
        env = dict(os.environ, BPCCSP_PURE=pure)
        if not pure:
            env.pop("BPCCSP_PURE", None)
        cmd = [sys.executable, os.path.abspath(__file__), "--worker",
               "--hk-n", str(args.hk_n), "--mst-n", str(args.mst_n),
               "--lp-count", str(args.lp_count), "--repeat", str(args.repeat)]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True)
        if out.returncode != 0:
            sys.stderr.write(out.stderr)
            return out.returncode
        results[label] = json.loads(out.stdout)

    if results["compiled"]["compiled"] == results["fallback"]["compiled"]:
        print("note: extension module not built; both runs used the fallback")

    names = {"held_karp_s": f"cycle table n={args.hk_n}",
             "mst_s": f"spanning tree n={args.mst_n}",
             "lp_batch_s": f"{args.lp_count} LP solves"}
    print(f"{'workload':<24}{'compiled':>12}{'fallback':>12}{'speedup':>10}")
    for key, name in names.items():
        fast, slow = results["compiled"][key], results["fallback"][key]
        print(f"{name:<24}{fast:>11.4f}s{slow:>11.4f}s"
              f"{slow / fast:>9.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
