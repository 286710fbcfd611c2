"""Exhaustive reference solver for small instances.

Enumerates every customer subset, prices the cheapest route over it (one
shortest-cycle table shared by all subsets for tours, a fresh spanning
tree per subset for trees), and adds the best coverage of the rest.  Meant
as ground truth in tests; the practical ceiling is about 14 vertices.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .instance import BUDGET_TOL, TOUR, TREE, Instance, Solution, edge_key
from .transport import best_coverage

ORACLE_MAX = 14


def _tour_witness(dp, dist, mask, m):
    """Backtrack one cheapest cycle through the customers in ``mask``."""
    js = [j for j in range(m) if mask >> j & 1]
    end = min(js, key=lambda j: dp[mask, j] + dist[j + 1, 0])
    order = [end]
    cur, cm = end, mask
    while cm & (cm - 1):
        pm = cm ^ (1 << cur)
        want = dp[cm, cur]
        ks = [k for k in range(m) if pm >> k & 1]
        cur = min(ks, key=lambda k: abs(dp[pm, k] + dist[k + 1, cur + 1] - want))
        cm = pm
        order.append(cur)
    verts = [0] + [j + 1 for j in reversed(order)] + [0]
    return tuple(sorted(edge_key(a, b) for a, b in zip(verts, verts[1:])))


def _tree_witness(dist, verts):
    """Minimum spanning tree edges over ``verts`` (Prim, depot first)."""
    k = len(verts)
    best = np.array([dist[verts[0], v] for v in verts])
    best[0] = np.inf
    parent = np.zeros(k, dtype=int)
    intree = np.zeros(k, dtype=bool)
    intree[0] = True
    edges = []
    for _ in range(k - 1):
        j = int(np.argmin(best))
        edges.append(edge_key(verts[parent[j]], verts[j]))
        intree[j] = True
        for i in range(k):
            if not intree[i] and dist[verts[j], verts[i]] < best[i]:
                best[i] = dist[verts[j], verts[i]]
                parent[i] = j
        best[intree] = np.inf
    return tuple(sorted(edges))


def solve_exhaustive(instance: Instance, include_coverage: bool = True) -> Solution:
    """Optimal solution by enumeration of all customer subsets."""
    n = instance.n
    if n > ORACLE_MAX:
        raise ValueError(f"exhaustive solver limited to {ORACLE_MAX} vertices, got {n}")
    dist = instance.cost_matrix()
    m = n - 1
    budget = instance.budget + BUDGET_TOL

    dp = kernels.held_karp_table(dist) if instance.kind == TOUR else None

    best_obj = -np.inf
    best_mask = -1
    best_cover: dict = {}
    feasible_subsets = 0

    for mask in range(1 << m):
        customers = [j + 1 for j in range(m) if mask >> j & 1]
        if instance.kind == TOUR:
            if len(customers) < 2:
                continue  # a cycle needs three vertices
            route = min(dp[mask, j - 1] + dist[j, 0] for j in customers)
        else:
            if not customers:
                route = 0.0
            else:
                verts = [0] + customers
                route = kernels.mst_cost(dist[np.ix_(verts, verts)])
        if route > budget:
            continue
        feasible_subsets += 1
        obj = sum(instance.prize[v] for v in customers)
        cover: dict = {}
        if include_coverage:
            gain, cover = best_coverage(instance, customers)
            obj += gain
        if obj > best_obj + 1e-12:
            best_obj = obj
            best_mask = mask
            best_cover = cover

    stats = {"subsets": 1 << m, "feasible_subsets": feasible_subsets}
    if best_mask < 0:
        return Solution("infeasible", -np.inf, -np.inf, frozenset(), (), {}, stats)

    customers = [j + 1 for j in range(m) if best_mask >> j & 1]
    visited = frozenset([0] + customers)
    if instance.kind == TOUR:
        edges = _tour_witness(dp, dist, best_mask, m)
    elif customers:
        edges = _tree_witness(dist, [0] + customers)
    else:
        edges = ()
    return Solution("optimal", float(best_obj), float(best_obj),
                    visited, edges, best_cover, stats)
