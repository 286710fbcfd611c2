"""Cut separation: support graph, component cuts, global min-cut, symmetry.

Connectivity separation runs in two layers: structurally disconnected
support graphs yield one cut per (depot-free component, vertex), plus the
complement of the depot's component; connected fractional points at the
root get a global min-cut pass.  Lazy symmetry families are checked only
at integer candidates.  Every emitted cut is globally valid; emission is
gated on a violation of at least ``VIOLATION_TOL`` and deduplicated by a
structural key.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import networkx as nx

from .formulation import (MASTER, ModelHandle, TIE_COST, TIE_LEX, TOUR, TREE,
                          connectivity_row, quad_candidates,
                          triangle_candidates)
from .instance import edge_key
from .lp_engine import LE

EPS = 1e-6            # support-graph membership / integrality epsilon
VIOLATION_TOL = 1e-6  # minimum violation before a cut is worth adding
ROUND_LIMIT = 50      # separation rounds per node before giving up

CONNECTIVITY = "connectivity"
TWO_EDGE = "two-edge-connectivity"
TRIANGLE = "triangle"
QUAD = "quad"
BENDERS = "benders-feasibility"


@dataclass(frozen=True)
class Cut:
    """A globally valid row, keyed for pool deduplication."""

    family: str
    coefs: tuple            # ((column, coefficient), ...)
    rel: str
    rhs: float
    key: tuple

    def violation(self, point) -> float:
        lhs = sum(point[c] * a for c, a in self.coefs)
        return lhs - self.rhs if self.rel == LE else self.rhs - lhs


def _connectivity_family(handle: ModelHandle) -> str:
    return TWO_EDGE if handle.kind == TOUR else CONNECTIVITY


def _connectivity_cut(handle: ModelHandle, S: frozenset, v: int) -> Cut:
    coefs, rel, rhs = connectivity_row(handle, S, v, separated=True)
    return Cut(_connectivity_family(handle), tuple(coefs), rel, rhs,
               (_connectivity_family(handle), S, v))


def support_graph(handle: ModelHandle, point) -> nx.Graph:
    """Vertices with positive y (plus the depot), edges with positive x."""
    g = nx.Graph()
    g.add_node(0)
    for v, col in handle.y_col.items():
        if point[col] > EPS:
            g.add_node(v)
    for e, col in handle.x_col.items():
        if point[col] > EPS:
            g.add_edge(*e, weight=point[col])
    return g


def separate_components(handle: ModelHandle, point,
                        at_integer: bool = False) -> List[Cut]:
    """Component cuts for a disconnected support graph (empty otherwise).

    Fractional points are capped at n cuts per round to keep the LP lean;
    integer candidates are uncapped (every depot-free component must be
    refuted for the accept/reject decision to be sound).
    """
    g = support_graph(handle, point)
    comps = [set(c) for c in nx.connected_components(g)]
    if len(comps) == 1:
        return []  # connected support: this layer has nothing to say
    depot_comp = next(c for c in comps if 0 in c)

    cuts: List[Cut] = []
    seen = set()

    def emit(S: frozenset, v: int):
        cut = _connectivity_cut(handle, S, v)
        if cut.key in seen:
            return
        seen.add(cut.key)
        if cut.violation(point) >= VIOLATION_TOL:
            cuts.append(cut)

    for comp in sorted((c for c in comps if 0 not in c), key=min):
        S = frozenset(comp)
        for v in sorted(comp):
            emit(S, v)
    complement = frozenset(range(handle.instance.n)) - frozenset(depot_comp)
    if complement:
        for v in sorted(complement):
            emit(complement, v)

    if not at_integer:
        return cuts[:handle.instance.n]
    return cuts


def separate_min_cut(handle: ModelHandle, point) -> List[Cut]:
    """Global min-cut separation for a connected fractional support graph."""
    g = support_graph(handle, point)
    if len(g) < 2 or not nx.is_connected(g):
        return []
    weight, (side_a, side_b) = nx.stoer_wagner(g)
    S = frozenset(side_b if 0 in side_a else side_a)
    cuts = []
    for v in sorted(S):
        cut = _connectivity_cut(handle, S, v)
        if cut.violation(point) >= VIOLATION_TOL:
            cuts.append(cut)
    return cuts


def _clique_edges_exist(inst, verts) -> bool:
    return all(inst.has_edge(a, b)
               for i, a in enumerate(verts) for b in verts[i + 1:])


def _triangle_top(inst, e, k, tie_break) -> bool:
    """Is edge ``e`` the banned (most expensive) edge of 3-clique e+{k}?"""
    v, w = e
    sides = [e, edge_key(v, k), edge_key(w, k)]
    if tie_break == TIE_LEX:
        return max(sides, key=lambda s: (inst.cost_of(*s), s)) == e
    cost = inst.cost_of(*e)
    return all(cost > inst.cost_of(*s) for s in sides[1:])


def _quad_top(inst, e1, e2, tie_break) -> bool:
    """Is (e1, e2) the banned pairing of its 4-clique?"""
    quad = sorted(set(e1) | set(e2))
    a, b, c, d = quad
    pairings = [(edge_key(a, b), edge_key(c, d)),
                (edge_key(a, c), edge_key(b, d)),
                (edge_key(a, d), edge_key(b, c))]
    mine = tuple(sorted((e1, e2)))

    def cost_sum(pair):
        return inst.cost_of(*pair[0]) + inst.cost_of(*pair[1])

    if tie_break == TIE_LEX:
        def pair_key(pair):
            ks = sorted(((inst.cost_of(*e), e) for e in pair), reverse=True)
            return (cost_sum(pair), ks)
        top = max(pairings, key=pair_key)
        return tuple(sorted(top)) == mine
    sums = sorted(cost_sum(p) for p in pairings)
    return cost_sum(mine) > sums[1] and tuple(
        sorted(max(pairings, key=cost_sum))) == mine


def separate_symmetry(handle: ModelHandle, point) -> List[Cut]:
    """Violated lazy symmetry rows at an integer candidate."""
    inst = handle.instance
    selected = [e for e, col in sorted(handle.x_col.items())
                if point[col] > 1.0 - EPS]
    cuts: List[Cut] = []

    if handle.kind == TREE:
        for e in selected:
            v, w = e
            for k in range(inst.n):
                if k in e or not inst.has_edge(v, k) or not inst.has_edge(w, k):
                    continue
                if handle.y_value(point, k) <= 1.0 - EPS:
                    continue
                if not _triangle_top(inst, e, k, handle.tie_break):
                    continue
                if k == 0:
                    cuts.append(Cut(TRIANGLE, ((handle.x_col[e], 1.0),), LE,
                                    0.0, (TRIANGLE, e, 0)))
                else:
                    cuts.append(Cut(
                        TRIANGLE,
                        ((handle.x_col[e], 1.0), (handle.y_col[k], 1.0)),
                        LE, 1.0, (TRIANGLE, e, k)))
        return cuts

    for i, e1 in enumerate(selected):
        for e2 in selected[i + 1:]:
            if set(e1) & set(e2):
                continue
            if not _clique_edges_exist(inst, sorted(set(e1) | set(e2))):
                continue
            if not _quad_top(inst, e1, e2, handle.tie_break):
                continue
            cuts.append(Cut(
                QUAD, ((handle.x_col[e1], 1.0), (handle.x_col[e2], 1.0)),
                LE, 1.0, (QUAD, e1, e2)))
    return cuts
