"""Release gate: the ten acceptance criteria, one verdict line apiece.

Each test prints ``criterion NN <label>: PASS|FAIL (...)`` on the original
stdout, bypassing capture, so a plain ``pytest -v`` run shows the whole
scoreboard, then asserts.  The expensive shared work (oracle plus
branch-and-cut over the 200-instance reference suite) runs once in a
module-scope fixture and feeds criteria 1, 2 and 10.

The suite sweeps the generator knob grid via ``conftest.instance_grid``;
capacity fractions there are the small-n analogues because the full-scale
fractions all round to zero capacity below a dozen vertices (zero stays in
the sweep as its own corner).
"""

from __future__ import annotations

import itertools
import math
import time
from collections import defaultdict

import networkx as nx
import numpy as np
import pytest

import lp_oracle
from bpccsp import benders, oracle, separation
from bpccsp.bnc import BENDERS, BNC, SolverConfig, solve
from bpccsp.formulation import LAZY, MASTER, OFF, UPFRONT, build_compact
from bpccsp.instance import (KNOWN_BASES, TOUR, TREE, derive_parameters,
                             edge_key, make_instance, random_instance)
from bpccsp.lp_engine import LE, NumericalFailure, solve_lp
from bpccsp.separation import (CONNECTIVITY, QUAD, TRIANGLE, TWO_EDGE,
                               separate_min_cut)

from conftest import instance_grid
from test_benders import ray_violation, subproblem_lp_feasible
from test_separation import plain_instance

OBJ_TOL = 1e-6
SUITE_SEED = 20260814
SUITE_SIZE = 200


@pytest.fixture
def scoreboard(capsys):
    """Print one verdict line per criterion on the uncaptured stdout."""
    def emit(num: int, label: str, ok: bool, detail: str) -> None:
        line = (f"criterion {num:02d} {label}: "
                f"{'PASS' if ok else 'FAIL'} ({detail})")
        with capsys.disabled():
            print(line, flush=True)
        assert ok, line
    return emit


def _signature(sol):
    """Everything a deterministic replay must reproduce, minus wall time."""
    stats = tuple(sorted((k, v) for k, v in sol.stats.items()
                         if k != "wall_time"))
    return (sol.status, sol.objective, sol.bound, sol.visited,
            tuple(sol.edges), tuple(sorted(sol.coverage.items())), stats)


@pytest.fixture(scope="module")
def reference_suite():
    """(instance, oracle solution, branch-and-cut solution) per suite entry."""
    rows = []
    start = time.perf_counter()
    for inst in instance_grid(SUITE_SEED, SUITE_SIZE, n_lo=5, n_hi=10):
        truth = oracle.solve_exhaustive(inst)
        got = solve(inst, SolverConfig(deterministic=True))
        rows.append((inst, truth, got))
    return rows, time.perf_counter() - start


def test_criterion_01_branch_and_cut_matches_oracle(reference_suite, scoreboard):
    rows, elapsed = reference_suite
    worst = 0.0
    optimal = 0
    for inst, truth, got in rows:
        assert got.status == truth.status, inst.name
        if truth.status == "optimal":
            optimal += 1
            worst = max(worst, abs(got.objective - truth.objective))
    ok = worst <= OBJ_TOL and elapsed < 300.0
    scoreboard(1, "branch-and-cut matches the oracle", ok,
            f"{len(rows)} instances, {optimal} optimal, "
            f"max |delta| {worst:.2e}, suite {elapsed:.1f}s")


def test_criterion_02_benders_matches_oracle(reference_suite, scoreboard):
    rows, _ = reference_suite
    worst = 0.0
    optimal = 0
    for inst, truth, got in rows:
        dec = solve(inst, SolverConfig(method=BENDERS, deterministic=True))
        assert dec.status == truth.status, inst.name
        if truth.status == "optimal":
            optimal += 1
            worst = max(worst, abs(dec.objective - truth.objective),
                        abs(dec.objective - got.objective))
    ok = worst <= OBJ_TOL
    scoreboard(2, "decomposition matches oracle and branch-and-cut", ok,
            f"{len(rows)} instances, {optimal} optimal, "
            f"max |delta| {worst:.2e}")


def test_criterion_03_symmetry_rows_preserve_optimum(scoreboard):
    rng = np.random.default_rng(31)
    worst = 0.0
    per_kind = 100
    for kind in (TOUR, TREE):
        for i in range(per_kind):
            n = int(rng.integers(5, 9))
            inst = random_instance(
                rng, n, kind,
                budget_frac=(0.25, 0.5, 0.75)[i % 3],
                radius_frac=(0.5, 1.0, 2.0)[(i // 3) % 3],
                capacity_frac=(0.0, 0.1, 0.25)[(i // 9) % 3],
                coverage_ratio=(0.5, 0.75)[i % 2])
            plain = solve(inst, SolverConfig(symmetry=OFF, deterministic=True))
            for policy in (UPFRONT, LAZY):
                ruled = solve(inst, SolverConfig(symmetry=policy,
                                                 deterministic=True))
                assert ruled.status == plain.status, (inst.name, policy)
                if plain.status == "optimal":
                    worst = max(worst, abs(ruled.objective - plain.objective))
    ok = worst == 0.0
    scoreboard(3, "symmetry rows preserve the optimum", ok,
            f"{2 * per_kind} instances x 2 policies, max |delta| {worst:.1e}")


# --- criterion 4 machinery: capture every emitted cut, then check each one
# against the full catalogue of integer-feasible states ---------------------

def _capture_all_cuts(inst, method):
    """Solve with lazy symmetry while recording every separated cut."""
    captured = []
    names = ("separate_components", "separate_min_cut", "separate_symmetry")
    saved = {name: getattr(separation, name) for name in names}
    saved_ray = benders.ray_cut

    def listening(fn):
        def wrapped(handle, point, *args, **kwargs):
            cuts = fn(handle, point, *args, **kwargs)
            captured.extend((handle, cut) for cut in cuts)
            return cuts
        return wrapped

    def listening_ray(handle, ray):
        cut = saved_ray(handle, ray)
        captured.append((handle, cut))
        return cut

    for name, fn in saved.items():
        setattr(separation, name, listening(fn))
    benders.ray_cut = listening_ray
    try:
        sol = solve(inst, SolverConfig(method=method, symmetry=LAZY,
                                       min_cut_all_nodes=True,
                                       deterministic=True))
    finally:
        for name, fn in saved.items():
            setattr(separation, name, fn)
        benders.ray_cut = saved_ray
    return sol, captured


def _spanning_edge_sets(inst, members):
    """Budget-feasible edge sets spanning exactly ``members`` (tree kind)."""
    verts = sorted(members)
    need = len(verts) - 1
    if need == 0:
        yield (), 0.0
        return
    pool = [e for e in sorted(inst.edges)
            if e[0] in members and e[1] in members]
    index = {v: i for i, v in enumerate(verts)}
    for combo in itertools.combinations(pool, need):
        cost = sum(inst.cost_of(*e) for e in combo)
        if cost > inst.budget + 1e-9:
            continue
        parent = list(range(len(verts)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        joined = 0
        for u, v in combo:
            ru, rv = find(index[u]), find(index[v])
            if ru != rv:
                parent[ru] = rv
                joined += 1
        if joined == need:
            yield combo, cost


def _cycle_edge_sets(inst, members):
    """Budget-feasible depot cycles over ``members``, orientation-deduped."""
    customers = sorted(members - {0})
    if len(customers) < 2:
        return
    for perm in itertools.permutations(customers):
        if perm[0] > perm[-1]:
            continue
        order = (0,) + perm + (0,)
        cost = sum(inst.cost_of(order[i], order[i + 1])
                   for i in range(len(order) - 1))
        if cost > inst.budget + 1e-9:
            continue
        yield tuple(sorted(edge_key(order[i], order[i + 1])
                           for i in range(len(order) - 1))), cost


def _coverage_maps(inst, members):
    """Feasible coverage assignments for the unvisited customers."""
    outside = [v for v in range(1, inst.n) if v not in members]
    menus = [(None,) + tuple(w for w in sorted(inst.neighbourhood[v])
                             if w in members)
             for v in outside]
    for pick in itertools.product(*menus):
        load = defaultdict(int)
        for w in pick:
            if w is not None:
                load[w] += 1
        if all(load[w] <= inst.capacity[w] for w in load):
            yield {v: w for v, w in zip(outside, pick) if w is not None}


def _embed_state(handle, members, edges, coverage):
    """Column values of one integer-feasible state under ``handle``'s model."""
    point = {}
    for v in members:
        if v:
            point[handle.y_col[v]] = 1.0
    for e in edges:
        point[handle.x_col[e]] = 1.0
    if handle.u_col and edges:
        adj = defaultdict(set)
        for u, v in edges:
            adj[u].add(v)
            adj[v].add(u)
        seen, frontier = {0}, [0]
        while frontier:
            u = frontier.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    point[handle.u_col[(u, v)]] = 1.0
                    frontier.append(v)
    for v, w in coverage.items():
        if handle.mode == MASTER:
            point[handle.theta_col[v] if w else handle.eta_col[v]] = 1.0
        else:
            point[handle.z_col[(v, w)]] = 1.0
    return point


def _assert_symmetry_row_shape(inst, handle, cut):
    """The row's coefficients must follow from its key, so the semantic
    evaluation below can trust the key alone."""
    if cut.family == TRIANGLE:
        _, e, k = cut.key
        if k == 0:
            want = ((handle.x_col[e], 1.0),)
        else:
            want = ((handle.x_col[e], 1.0), (handle.y_col[k], 1.0))
    else:
        _, e1, e2 = cut.key
        want = ((handle.x_col[e1], 1.0), (handle.x_col[e2], 1.0))
    assert tuple(sorted(cut.coefs)) == tuple(sorted(want)), cut.key


def _symmetry_row_excludes(cut, members, edgeset):
    if cut.family == TRIANGLE:
        _, e, k = cut.key
        return e in edgeset and (k == 0 or k in members)
    _, e1, e2 = cut.key
    return e1 in edgeset and e2 in edgeset


def _assert_symmetry_cut_safe(inst, handle, cut, structures):
    """A symmetry row may only ban cost-dominated edge patterns, and every
    visited set must keep an equal-or-cheaper compliant structure."""
    _assert_symmetry_row_shape(inst, handle, cut)
    if cut.family == TRIANGLE:
        _, e, k = cut.key
        v, w = e
        assert inst.cost_of(*e) >= max(inst.cost_of(v, k),
                                       inst.cost_of(w, k)) - 1e-12, cut.key
    else:
        _, e1, e2 = cut.key
        a, b, c, d = sorted(set(e1) | set(e2))
        banned = inst.cost_of(*e1) + inst.cost_of(*e2)
        others = [inst.cost_of(a, b) + inst.cost_of(c, d),
                  inst.cost_of(a, c) + inst.cost_of(b, d),
                  inst.cost_of(a, d) + inst.cost_of(b, c)]
        assert banned >= max(others) - 1e-12, cut.key
    for members, edge_sets in structures.items():
        kept = [cost for edges, cost in edge_sets
                if not _symmetry_row_excludes(cut, members, set(edges))]
        if len(kept) == len(edge_sets):
            continue
        lost = [cost for edges, cost in edge_sets
                if _symmetry_row_excludes(cut, members, set(edges))]
        # coverage options depend on the visited set only, so an
        # equal-or-cheaper compliant structure preserves the objective
        assert kept and min(kept) <= min(lost) + 1e-9, \
            (cut.key, sorted(members))


def test_criterion_04_every_emitted_cut_is_safe(scoreboard):
    rng = np.random.default_rng(41)
    specs = [(TOUR, 6, 2, 0.7), (TOUR, 7, 1, 0.6),
             (TREE, 6, 2, 0.6), (TREE, 7, 1, 0.5)]
    families = {CONNECTIVITY: 0, TWO_EDGE: 0, separation.BENDERS: 0,
                TRIANGLE: 0, QUAD: 0}
    state_count = 0
    for kind, n, capacity, budget_frac in specs:
        inst = random_instance(rng, n, kind, budget_frac=budget_frac,
                               radius_frac=1.5, capacity=capacity,
                               coverage_ratio=0.5)
        emitted = {}
        handles = {}
        for method in (BNC, BENDERS):
            _, got = _capture_all_cuts(inst, method)
            for handle, cut in got:
                handles[id(handle)] = handle
                emitted.setdefault((id(handle), cut.key), (handle, cut))
        assert emitted, inst.name

        maker = _cycle_edge_sets if kind == TOUR else _spanning_edge_sets
        structures = {}
        for r in range(inst.n):
            for combo in itertools.combinations(range(1, inst.n), r):
                members = frozenset((0,) + combo)
                found = list(maker(inst, members))
                if found:
                    structures[members] = found
        covers = {members: list(_coverage_maps(inst, members))
                  for members in structures}
        states = [(members, edges, cov)
                  for members, edge_sets in structures.items()
                  for edges, _ in edge_sets
                  for cov in covers[members]]
        state_count += len(states)

        # the enumeration is itself checked against the oracle
        truth = oracle.solve_exhaustive(inst)
        if states:
            best = max(sum(inst.prize[v] for v in members)
                       + sum(inst.coverage_prize[(v, w)]
                             for v, w in cov.items())
                       for members, _, cov in states)
            assert truth.status == "optimal"
            assert best == pytest.approx(truth.objective, abs=1e-9)
        else:
            assert truth.status == "infeasible"

        by_handle = defaultdict(list)
        for handle, cut in emitted.values():
            by_handle[id(handle)].append(cut)
        for hid, cuts in by_handle.items():
            handle = handles[hid]
            plain = [c for c in cuts if c.family not in (TRIANGLE, QUAD)]
            if plain and states:
                grid = np.zeros((len(states), handle.model.num_vars))
                for i, (members, edges, cov) in enumerate(states):
                    for col, val in _embed_state(handle, members, edges,
                                                 cov).items():
                        grid[i, col] = val
                for cut in plain:
                    cols = np.array([col for col, _ in cut.coefs], dtype=int)
                    vals = np.array([v for _, v in cut.coefs])
                    lhs = grid[:, cols] @ vals
                    worst = (lhs.max() - cut.rhs if cut.rel == LE
                             else cut.rhs - lhs.min())
                    assert worst <= 1e-9, (inst.name, cut.key, worst)
                    families[cut.family] += 1
            for cut in cuts:
                if cut.family in (TRIANGLE, QUAD):
                    _assert_symmetry_cut_safe(inst, handle, cut, structures)
                    families[cut.family] += 1
    ok = all(count > 0 for count in families.values())
    scoreboard(4, "every emitted cut is safe", ok,
            f"{state_count} feasible states; cuts checked "
            + ", ".join(f"{fam}:{cnt}" for fam, cnt in sorted(families.items())))


def test_criterion_05_ray_verdicts_match_the_subproblem_lp(scoreboard):
    rng = np.random.default_rng(53)
    verdicts = {True: 0, False: 0}
    least = math.inf
    for inst in instance_grid(523, 125, n_lo=4, n_hi=10):
        for _ in range(4):
            y_vals = [1.0] + [float(rng.integers(0, 5)) / 4.0
                              for _ in range(inst.n - 1)]
            theta_vals = [0.0] + [
                float(rng.integers(0, 5)) / 4.0 if rng.random() < 0.6 else 0.0
                for _ in range(inst.n - 1)]
            ray = benders.check_subproblem(inst, y_vals, theta_vals)
            feasible = subproblem_lp_feasible(inst, y_vals, theta_vals)
            assert (ray is None) == feasible, inst.name
            verdicts[feasible] += 1
            if ray is not None:
                violation = ray_violation(ray, y_vals, theta_vals)
                assert violation >= 1e-6, inst.name
                least = min(least, violation)
    points = sum(verdicts.values())
    ok = points == 500 and min(verdicts.values()) > 0
    scoreboard(5, "ray verdicts match the subproblem relaxation", ok,
            f"{points} points, {verdicts[True]} feasible / "
            f"{verdicts[False]} cut, min violation {least:.3f}")


def test_criterion_06_min_cut_equals_exhaustive_bipartition(scoreboard):
    rng = np.random.default_rng(61)
    trials = 100
    for _ in range(trials):
        n = int(rng.integers(4, 13))
        coords = [(float(x), float(y))
                  for x, y in rng.uniform(0.0, 100.0, size=(n, 2))]
        inst = plain_instance(coords, TREE)
        handle = build_compact(inst)
        point = [0.0] * handle.model.num_vars
        for v in range(1, n):
            point[handle.y_col[v]] = 1.0
        order = [int(v) for v in rng.permutation(n)]
        support = {}
        for a, b in zip(order, order[1:]):
            support[edge_key(a, b)] = float(rng.integers(1, 65)) / 64.0
        for e in sorted(inst.edges):
            if e not in support and rng.random() < 0.25:
                support[e] = float(rng.integers(1, 65)) / 64.0
        for e, weight in support.items():
            point[handle.x_col[e]] = weight

        cuts = separate_min_cut(handle, point)
        assert cuts, n
        side = cuts[0].key[1]
        assert all(cut.key[1] == side for cut in cuts)
        value = sum(weight for (a, b), weight in support.items()
                    if (a in side) != (b in side))

        best = math.inf
        for mask in range(1, 1 << (n - 1)):
            group = {v for v in range(1, n) if mask >> (v - 1) & 1}
            crossing = sum(weight for (a, b), weight in support.items()
                           if (a in group) != (b in group))
            best = min(best, crossing)
        assert value == best, (n, value, best)
    scoreboard(6, "separated min cut equals the exhaustive bipartition", True,
            f"{trials} support graphs, exact equality")


# reference parameter grid for the six bundled bases: budgets by kind at
# fractions (0.25, 0.5, 0.75), radii at (0.5, 1.0, 2.0), capacities at
# (0.005, 0.01, 0.02, 0.05)
REFERENCE_BUDGETS = {
    "p4": {TOUR: (176.97, 353.93, 530.90), TREE: (158.82, 317.64, 476.50)},
    "p5": {TOUR: (194.11, 388.22, 582.33), TREE: (173.00, 345.99, 518.98)},
    "X-n162-k11": {TOUR: (2293.74, 4587.48, 6881.21),
                   TREE: (1975.84, 3951.68, 5927.51)},
    "X-n195-k51": {TOUR: (2555.42, 5110.84, 7666.26),
                   TREE: (2220.53, 4441.07, 6661.61)},
    "ch150": {TOUR: (1632.73, 3265.45, 4898.18),
              TREE: (1470.24, 2940.48, 4410.72)},
    "kroa200": {TOUR: (7342.35, 14684.70, 22027.10),
                TREE: (6483.15, 12966.30, 19449.50)},
}
REFERENCE_RADII = {
    "p4": (16.74, 33.47, 66.94),
    "p5": (16.46, 32.91, 65.82),
    "X-n162-k11": (245.78, 491.56, 983.12),
    "X-n195-k51": (248.23, 496.46, 992.92),
    "ch150": (179.66, 359.31, 718.62),
    "kroa200": (850.59, 1701.17, 3402.34),
}
REFERENCE_CAPACITIES = {
    "p4": (1, 2, 3, 8), "p5": (1, 2, 4, 10),
    "X-n162-k11": (1, 2, 3, 8), "X-n195-k51": (1, 2, 4, 10),
    "ch150": (1, 2, 3, 8), "kroa200": (1, 2, 4, 10),
}
# cells whose reference value carries one decimal only; the derivation is
# asserted exactly there and must land within half of that last digit
ONE_DECIMAL_CELLS = {
    ("p4", TREE, 0.75): 476.46,
    ("p5", TREE, 0.25): 172.9925,
    ("kroa200", TOUR, 0.75): 22027.0575,
    ("kroa200", TREE, 0.75): 19449.45,
}


def test_criterion_07_generator_reproduces_the_reference_grid(scoreboard):
    worst = 0.0
    cells = 0
    coarse = 0
    for base, ref in KNOWN_BASES.items():
        for kind in (TOUR, TREE):
            for j, frac in enumerate((0.25, 0.5, 0.75)):
                budget, _, _ = derive_parameters(ref.n, kind, ref,
                                                 frac, 1.0, 0.01)
                want = REFERENCE_BUDGETS[base][kind][j]
                cells += 1
                exact = ONE_DECIMAL_CELLS.get((base, kind, frac))
                if exact is not None:
                    assert budget == pytest.approx(exact, abs=1e-9)
                    assert abs(budget - want) <= 0.05 + 1e-9, (base, kind, frac)
                    coarse += 1
                else:
                    worst = max(worst, abs(budget - want))
        for j, frac in enumerate((0.5, 1.0, 2.0)):
            _, radius, _ = derive_parameters(ref.n, TOUR, ref, 0.5, frac, 0.01)
            worst = max(worst, abs(radius - REFERENCE_RADII[base][j]))
            cells += 1
        for j, frac in enumerate((0.005, 0.01, 0.02, 0.05)):
            _, _, cap = derive_parameters(ref.n, TOUR, ref, 0.5, 1.0, frac)
            assert cap == REFERENCE_CAPACITIES[base][j], (base, frac)
            cells += 1
    # two-decimal references round half up, so half-way cells attain the
    # bound exactly; read "within" inclusively, guarding the float ulp
    ok = worst <= 0.005 + 1e-9
    scoreboard(7, "generator reproduces the reference parameter grid", ok,
            f"{cells} cells, max |delta| {worst:.6f}, "
            f"{coarse} one-decimal cells within 0.05")


def test_criterion_08_zero_capacity_and_ample_budget_limits(scoreboard):
    rng = np.random.default_rng(83)
    worst = 0.0
    optimal = 0
    tours = 50
    for i in range(tours):
        n = int(rng.integers(5, 10))
        inst = random_instance(rng, n, TOUR, capacity=0,
                               budget_frac=(0.4, 0.6, 0.8)[i % 3],
                               radius_frac=(0.5, 1.0, 2.0)[i % 3])
        full = solve(inst, SolverConfig(deterministic=True))
        plain = oracle.solve_exhaustive(inst, include_coverage=False)
        assert full.status == plain.status, inst.name
        if plain.status == "optimal":
            optimal += 1
            worst = max(worst, abs(full.objective - plain.objective))
            assert full.coverage == {}, inst.name
    trees = 25
    for i in range(trees):
        n = int(rng.integers(5, 10))
        base = random_instance(rng, n, TREE, capacity=0)
        graph = nx.Graph()
        for u, v in base.edges:
            graph.add_edge(u, v, weight=base.cost_of(u, v))
        span = sum(d["weight"]
                   for _, _, d in nx.minimum_spanning_edges(graph))
        inst = make_instance(base.cost_matrix(), budget=span + 1e-6,
                             prize=list(base.prize),
                             neighbourhood=[frozenset()] * n,
                             capacity=[0] * n, kind=TREE,
                             name=f"span-{i}")
        sol = solve(inst, SolverConfig(deterministic=True))
        assert sol.status == "optimal", inst.name
        assert sol.visited == frozenset(range(n)), inst.name
        assert sol.objective == pytest.approx(sum(inst.prize), abs=1e-9)
    ok = worst <= OBJ_TOL
    scoreboard(8, "capacity and budget limit cases behave", ok,
            f"{tours} zero-capacity tours ({optimal} optimal, max |delta| "
            f"{worst:.2e}), {trees} spanning-budget trees visit everything")


def test_criterion_09_lp_engine_matches_the_rational_oracle(scoreboard):
    rng = np.random.default_rng(97)
    worst = 0.0
    failures = 0
    outcomes = {"optimal": 0, "infeasible": 0}
    trials = 1000
    for _ in range(trials):
        model = lp_oracle.random_lp(rng)
        want_status, want_obj = lp_oracle.solve_exact(model)
        try:
            res = solve_lp(model)
        except NumericalFailure:
            failures += 1
            continue
        assert res.status == want_status
        outcomes[want_status] += 1
        if want_status == "optimal":
            worst = max(worst, abs(res.objective - float(want_obj)))
    ok = failures == 0 and worst <= 1e-6
    scoreboard(9, "simplex matches the rational vertex oracle", ok,
            f"{trials} models ({outcomes['optimal']} optimal / "
            f"{outcomes['infeasible']} infeasible), max |delta| {worst:.2e}, "
            f"{failures} numerical failures")


def test_criterion_10_deterministic_replay(reference_suite, scoreboard):
    rows, _ = reference_suite
    mismatches = 0
    for inst, _, first in rows:
        again = solve(inst, SolverConfig(deterministic=True))
        if _signature(first) != _signature(again):
            mismatches += 1
    ok = mismatches == 0
    scoreboard(10, "deterministic runs replay node for node", ok,
            f"{len(rows)} instances re-solved, {mismatches} mismatches")
