"""Max-weight capacitated assignment for coverage recovery.

The LP relaxations keep coverage variables continuous; once the visit
decisions are integral an optimal integral coverage always exists (the
remaining subproblem is a transportation problem), and this module
recovers one by successive most-profitable augmenting paths.
"""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

from .instance import Instance

_EPS = 1e-12


def max_weight_assignment(options: Sequence[Sequence[Tuple[int, float]]],
                          capacity: Sequence[int]) -> Tuple[float, List[int]]:
    """Assign items to slots maximizing total profit.

    ``options[i]`` lists ``(slot, profit)`` pairs available to item ``i``;
    each item takes at most one slot and slot ``w`` holds at most
    ``capacity[w]`` items.  Items stay unassigned when nothing strictly
    profitable remains.  Returns ``(total, assigned)`` with ``assigned[i]``
    the chosen slot or -1.

    Augmenting paths alternate unused and used item-slot pairs, so each
    round is a longest-path computation (Bellman-Ford, profits may repeat);
    taking the most profitable augmentation every round keeps the residual
    graph free of positive cycles.
    """
    ni = len(options)
    ns = len(capacity)
    assigned = [-1] * ni
    load = [0] * ns
    total = 0.0
    profit = [dict(opts) for opts in options]

    # nodes: 0 = source, 1..ni items, ni+1..ni+ns slots, last = sink
    snode = 0
    tnode = ni + ns + 1

    while True:
        dist = [float("-inf")] * (ni + ns + 2)
        pred: List[Tuple[int, int]] = [(-1, -1)] * (ni + ns + 2)  # (node, item)
        dist[snode] = 0.0
        for i in range(ni):
            if assigned[i] < 0 and profit[i]:
                dist[1 + i] = 0.0
                pred[1 + i] = (snode, -1)
        # longest alternating path; no positive residual cycles exist as
        # long as every augmentation is a most-profitable one, so plain
        # Bellman-Ford rounds with an early exit converge
        for _ in range(ni + ns + 2):
            changed = False
            for i in range(ni):
                di = dist[1 + i]
                if di == float("-inf"):
                    continue
                cur = assigned[i]
                for w, q in profit[i].items():
                    if w == cur:
                        continue
                    nd = di + q
                    if nd > dist[1 + ni + w] + _EPS:
                        dist[1 + ni + w] = nd
                        pred[1 + ni + w] = (1 + i, i)
                        changed = True
            for w in range(ns):
                dw = dist[1 + ni + w]
                if dw == float("-inf"):
                    continue
                if load[w] < capacity[w] and dw > dist[tnode] + _EPS:
                    dist[tnode] = dw
                    pred[tnode] = (1 + ni + w, -1)
                    changed = True
                for i in range(ni):
                    if assigned[i] == w:
                        nd = dw - profit[i][w]
                        if nd > dist[1 + i] + _EPS:
                            dist[1 + i] = nd
                            pred[1 + i] = (1 + ni + w, i)
                            changed = True
            if not changed:
                break

        if dist[tnode] <= _EPS:
            break
        total += dist[tnode]

        # walk back from the sink flipping assignments
        node = pred[tnode][0]
        while node != snode:
            prev, item = pred[node]
            if node > ni and item >= 0:
                assigned[item] = node - 1 - ni  # item -> slot arc taken
            node = prev
        load = [0] * ns
        for i in range(ni):
            if assigned[i] >= 0:
                load[assigned[i]] += 1

    return total, assigned


def best_coverage(instance: Instance, visited) -> Tuple[float, Dict[int, int]]:
    """Most profitable coverage of unvisited vertices by a visited set.

    Returns ``(prize, coverage)`` with ``coverage`` mapping each covered
    vertex to its covering vertex.  The depot may cover (within its own
    capacity); visited vertices are never covered.
    """
    vset = set(visited) | {0}
    hosts = sorted(vset)
    hpos = {w: i for i, w in enumerate(hosts)}
    capacity = [instance.capacity[w] for w in hosts]

    items = []
    options: List[List[Tuple[int, float]]] = []
    for v in range(1, instance.n):
        if v in vset:
            continue
        opts = [(hpos[w], instance.coverage_prize[(v, w)])
                for w in instance.neighbourhood[v]
                if w in vset and instance.coverage_prize[(v, w)] > 0.0]
        if opts:
            items.append(v)
            options.append(opts)

    total, assigned = max_weight_assignment(options, capacity)
    coverage = {v: hosts[slot] for v, slot in zip(items, assigned) if slot >= 0}
    return total, coverage
