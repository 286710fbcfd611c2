"""Branch-and-bound driver around LP relaxations and cut separation.

One search serves both methods: the compact model separates connectivity
(and lazy symmetry rows), the decomposition master additionally asks the
transportation subproblem for feasibility cuts.  Nodes are processed
best-bound-first; within a node, separation rounds alternate with LP
re-solves until no cut fires, then the point is either accepted as an
incumbent (after an exact structural re-check) or branched on.

Workers share the node heap, the incumbent, and a global cut pool; each
worker owns a private model clone plus warm-start basis.  Deterministic
mode forces a single worker, which replays identical pivot and separation
sequences run to run.
"""

from __future__ import annotations

import heapq
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set, Tuple

from . import benders, separation, transport
from .formulation import (LAZY, MASTER, ModelHandle, TIE_LEX,
                          add_symmetry_breaking, build_compact, build_master,
                          default_symmetry_policy)
from .instance import (BUDGET_TOL, Instance, Solution, TREE, check_solution,
                       validate)
from .lp_engine import INT_TOL, NumericalFailure, solve_lp

BNC = "bnc"
BENDERS = "benders"
METHODS = (BNC, BENDERS)

FATHOM_TOL = 1e-7
_LOG_EVERY = 100  # nodes between periodic progress lines


@dataclass
class SolverConfig:
    method: str = BNC
    time_limit: float = 3600.0
    symmetry: Optional[str] = None       # None -> kind default
    tie_break: str = TIE_LEX
    min_cut_all_nodes: bool = False      # extend root-only min-cut separation
    separation_rounds: int = separation.ROUND_LIMIT
    deterministic: bool = False
    threads: int = 1
    log: Optional[Callable[[str], None]] = None

    def worker_count(self) -> int:
        return 1 if self.deterministic else max(1, int(self.threads))


@dataclass(order=True)
class _Node:
    sort_key: Tuple[float, int]             # (-parent bound, sequence)
    fixings: tuple = field(compare=False)   # ((col, 0|1), ...)
    depth: int = field(compare=False, default=0)

    @property
    def bound(self) -> float:
        return -self.sort_key[0]


class _Search:
    """Shared search state; all mutation happens under the lock."""

    def __init__(self, inst: Instance, config: SolverConfig):
        self.inst = inst
        self.config = config
        self.lock = threading.Lock()
        self.ready = threading.Condition(self.lock)
        self.heap: List[_Node] = []
        self.seq = 0
        self.pool: Dict[tuple, separation.Cut] = {}
        self.incumbent: Optional[Solution] = None
        self.incumbent_obj = -math.inf
        self.busy = 0
        self.stop = False
        self.timed_out = False
        self.leftover_bounds: List[float] = []
        self.nodes = 0
        self.lp_solves = 0
        self.cut_counts: Dict[str, int] = {}
        self.failure: Optional[BaseException] = None
        self.t0 = time.monotonic()

    def elapsed(self) -> float:
        return time.monotonic() - self.t0

    def out_of_time(self) -> bool:
        return self.elapsed() >= self.config.time_limit

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def log(self, bound: float) -> None:
        if self.config.log is None:
            return
        inc = self.incumbent_obj
        gap = 0.0
        if math.isfinite(bound) and math.isfinite(inc) and inc:
            gap = max(0.0, (bound - inc) / abs(inc))
        cuts = ",".join(f"{k}:{v}" for k, v in sorted(self.cut_counts.items()))
        self.config.log(
            f"PROGRESS t={self.elapsed():.2f} nodes={self.nodes} "
            f"incumbent={inc:.6f} bound={bound:.6f} gap={gap:.6f} "
            f"cuts={cuts or 'none'}")


def _build_handle(inst: Instance, config: SolverConfig) -> ModelHandle:
    if config.method == BENDERS:
        handle = build_master(inst)
    else:
        handle = build_compact(inst)
    policy = config.symmetry or default_symmetry_policy(inst.kind)
    return add_symmetry_breaking(handle, policy, config.tie_break)


def _clone_handle(handle: ModelHandle) -> ModelHandle:
    return ModelHandle(
        handle.instance, handle.mode, handle.kind, handle.model.copy(),
        handle.x_col, handle.y_col, z_col=handle.z_col, u_col=handle.u_col,
        theta_col=handle.theta_col, eta_col=handle.eta_col,
        symmetry=handle.symmetry, tie_break=handle.tie_break)


def _depot_only_incumbent(inst: Instance) -> Optional[Solution]:
    """Trees may stay at the depot; tours have no such fallback."""
    if inst.kind != TREE:
        return None
    gain, coverage = transport.best_coverage(inst, frozenset([0]))
    return Solution("feasible", gain, math.inf, frozenset([0]), (), coverage)


def _is_integral(point, cols) -> bool:
    return all(min(point[c], 1.0 - point[c]) <= INT_TOL for c in cols)


def _branch_column(handle: ModelHandle, point) -> Optional[int]:
    """Most fractional y (ties: larger prize, lower index), then first x."""
    inst = handle.instance
    best = None
    best_key = None
    for v in sorted(handle.y_col):
        col = handle.y_col[v]
        frac = min(point[col], 1.0 - point[col])
        if frac <= INT_TOL:
            continue
        key = (frac, inst.prize[v], -v)
        if best_key is None or key > best_key:
            best, best_key = col, key
    if best is not None:
        return best
    for e in sorted(handle.x_col):
        col = handle.x_col[e]
        if min(point[col], 1.0 - point[col]) > INT_TOL:
            return col
    return None


def _apply_fixings(handle: ModelHandle, fixings) -> None:
    model = handle.model
    fixed = dict(fixings)
    for col in handle.branchable():
        val = fixed.get(col)
        if val is None:
            model.set_bounds(col, 0.0, 1.0)
        else:
            model.set_bounds(col, float(val), float(val))


def _candidate_solution(handle: ModelHandle, point,
                        lp_objective: float) -> Optional[Solution]:
    """Exact structural verification + coverage repair of an integral point.

    Returns None when the rounded point overdraws the budget once edge
    costs are summed exactly (the LP row tolerance is looser than the
    solution contract's); the caller then branches instead of accepting.
    """
    inst = handle.instance
    visited = frozenset([0] + [v for v, col in handle.y_col.items()
                               if point[col] > 0.5])
    edges = tuple(sorted(e for e, col in handle.x_col.items()
                         if point[col] > 0.5))
    used = sum(inst.cost_of(*e) for e in edges)
    if used > inst.budget + BUDGET_TOL:
        return None
    gain, coverage = transport.best_coverage(inst, visited)
    objective = sum(inst.prize[v] for v in visited if v) + gain
    if abs(objective - lp_objective) > 1e-6:
        raise NumericalFailure(
            f"coverage repair drifted from the LP objective "
            f"({objective!r} vs {lp_objective!r})")
    sol = Solution("feasible", objective, lp_objective, visited, edges,
                   coverage)
    errors = check_solution(inst, sol)
    if errors:
        raise NumericalFailure("accepted candidate fails verification: "
                               + "; ".join(errors))
    return sol


def _point_values(handle: ModelHandle, point, cols: Dict[int, int]) -> list:
    vals = [0.0] * handle.instance.n
    for v, col in cols.items():
        vals[v] = point[col]
    return vals


def _separate(search: _Search, handle: ModelHandle, point, at_integer: bool,
              at_root: bool) -> List[separation.Cut]:
    """One separation round in the fixed order; returns violated cuts."""
    cuts = separation.separate_components(handle, point, at_integer)
    if handle.mode == MASTER:
        y_vals = _point_values(handle, point, handle.y_col)
        y_vals[0] = 1.0
        theta_vals = _point_values(handle, point, handle.theta_col)
        ray = benders.check_subproblem(handle.instance, y_vals, theta_vals)
        if ray is not None:
            cuts.append(benders.ray_cut(handle, ray))
    if not cuts and not at_integer and \
            (at_root or search.config.min_cut_all_nodes):
        cuts = separation.separate_min_cut(handle, point)
    if at_integer and handle.symmetry == LAZY:
        cuts.extend(separation.separate_symmetry(handle, point))
    return cuts


def _process_node(search: _Search, handle: ModelHandle, node: _Node,
                  in_model: Set[tuple], basis_box: list) -> None:
    """Solve, separate, and either fathom, accept, or branch one node."""
    config = search.config
    model = handle.model
    _apply_fixings(handle, node.fixings)
    at_root = node.depth == 0

    rounds = 0
    while True:
        try:
            res = solve_lp(model, warm_start=basis_box[0])
        except NumericalFailure as err:
            raise NumericalFailure(
                f"node depth {node.depth} fixings {node.fixings}: "
                f"{err}") from err
        basis_box[0] = res.basis
        with search.lock:
            search.lp_solves += 1
            if res.status != "optimal":
                return  # LP infeasible: fathom
            if res.objective <= search.incumbent_obj + FATHOM_TOL:
                return
        bound = res.objective
        point = res.x
        at_integer = _is_integral(point, handle.branchable())

        fired: List[separation.Cut] = []
        if at_integer or rounds < config.separation_rounds:
            # pool cuts this model does not carry yet come first
            with search.lock:
                pending = [c for k, c in search.pool.items()
                           if k not in in_model]
            fired = [c for c in pending
                     if c.violation(point) >= separation.VIOLATION_TOL]
            if not fired:
                fresh = _separate(search, handle, point, at_integer, at_root)
                with search.lock:
                    for cut in fresh:
                        if cut.key not in search.pool:
                            search.pool[cut.key] = cut
                            search.cut_counts[cut.family] = \
                                search.cut_counts.get(cut.family, 0) + 1
                        if cut.key not in in_model:
                            fired.append(cut)
        if fired:
            for cut in fired:
                model.add_row(list(cut.coefs), cut.rel, cut.rhs)
                in_model.add(cut.key)
            rounds += 1
            if search.out_of_time():
                with search.lock:
                    search.leftover_bounds.append(bound)
                    search.timed_out = True
                    search.stop = True
                return
            continue

        if at_integer:
            sol = _candidate_solution(handle, point, bound)
            if sol is not None:
                with search.lock:
                    if sol.objective > search.incumbent_obj:
                        search.incumbent = sol
                        search.incumbent_obj = sol.objective
                        search.log(bound)
                return
            # rounded point broke the exact budget: branch instead

        col = _branch_column(handle, point)
        if col is None:
            # numerically integral yet rejected by the exact checks
            raise NumericalFailure(
                "integral LP point rejected by exact budget check; "
                "cannot branch further")
        with search.lock:
            for val in (1, 0):
                heapq.heappush(search.heap,
                               _Node((-bound, search.next_seq()),
                                     node.fixings + ((col, val),),
                                     node.depth + 1))
            search.ready.notify_all()
        return


def _worker(search: _Search, handle: ModelHandle) -> None:
    in_model: Set[tuple] = set()
    basis_box: list = [None]
    while True:
        with search.lock:
            while not search.heap and search.busy and not search.stop:
                search.ready.wait(0.05)
            if search.stop or (not search.heap and not search.busy):
                search.ready.notify_all()
                return
            if not search.heap:
                continue
            if search.out_of_time():
                search.timed_out = True
                search.stop = True
                search.ready.notify_all()
                return
            node = heapq.heappop(search.heap)
            if node.bound <= search.incumbent_obj + FATHOM_TOL:
                continue  # bound went stale while queued
            search.busy += 1
            search.nodes += 1
            nodes_now = search.nodes
        try:
            _process_node(search, handle, node, in_model, basis_box)
        except BaseException as err:  # surface through the driver
            with search.lock:
                search.failure = err
                search.stop = True
                search.ready.notify_all()
            return
        finally:
            with search.lock:
                search.busy -= 1
                if nodes_now % _LOG_EVERY == 0:
                    search.log(node.bound)
                search.ready.notify_all()


def solve(inst: Instance, config: Optional[SolverConfig] = None) -> Solution:
    """Exact solve; statuses: optimal, infeasible, or time_limit."""
    config = config or SolverConfig()
    if config.method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if config.time_limit <= 0.0:
        raise ValueError("time limit must be positive")
    validate(inst)
    base_handle = _build_handle(inst, config)

    search = _Search(inst, config)
    start = _depot_only_incumbent(inst)
    if start is not None:
        search.incumbent = start
        search.incumbent_obj = start.objective
    search.heap.append(_Node((-math.inf, search.next_seq()), ()))

    workers = config.worker_count()
    if workers == 1:
        _worker(search, base_handle)
    else:
        threads = [threading.Thread(
            target=_worker, args=(search, _clone_handle(base_handle)),
            name=f"bpccsp-worker-{i}") for i in range(workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if search.failure is not None:
        raise search.failure

    stats = {"nodes": search.nodes, "lp_solves": search.lp_solves,
             "wall_time": round(search.elapsed(), 6)}
    for family, count in sorted(search.cut_counts.items()):
        stats[f"cuts_{family}"] = count

    open_bounds = [n.bound for n in search.heap] + search.leftover_bounds
    if search.timed_out:
        bound = max([search.incumbent_obj] + open_bounds)
        search.log(bound)
        if search.incumbent is None:
            return Solution("time_limit", -math.inf, bound, frozenset(), (),
                            {}, stats)
        sol = search.incumbent
        return Solution("time_limit", sol.objective, bound, sol.visited,
                        sol.edges, sol.coverage, stats)
    if search.incumbent is None:
        return Solution("infeasible", -math.inf, -math.inf, frozenset(), (),
                        {}, stats)
    sol = search.incumbent
    search.log(sol.objective)
    return Solution("optimal", sol.objective, sol.objective, sol.visited,
                    sol.edges, sol.coverage, stats)
