"""Model builders: variables and static rows for every solver mode.

Two modes share one vocabulary: the compact model carries explicit
coverage variables z, the decomposition master replaces them with
aggregate coverage variables (theta for non-depot coverers, eta for the
depot).  Tours add 2-degree rows and state connectivity with coefficient
2; trees add directed arc variables u, an edge-count equality, and lifted
endpoint rows.  One row builder serves both initial and separated
connectivity so cut generation cannot drift from the static model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Tuple

from .instance import Instance, TOUR, TREE, edge_key
from .lp_engine import EQ, GE, LE, LpModel

COMPACT = "compact"
MASTER = "master"

UPFRONT = "upfront"
LAZY = "lazy"
OFF = "off"
SYMMETRY_POLICIES = (UPFRONT, LAZY, OFF)

TIE_LEX = "lexicographic"
TIE_COST = "cost"
TIE_BREAKS = (TIE_LEX, TIE_COST)


class DependentPrizes(ValueError):
    """Coverage prizes vary with the covering vertex; the master needs q_vw = q_v."""


@dataclass
class ModelHandle:
    """An LpModel plus the column maps tying it back to the instance."""

    instance: Instance
    mode: str                                       # compact | master
    kind: str                                       # tour | tree
    model: LpModel
    x_col: Dict[Tuple[int, int], int]               # edge key -> column
    y_col: Dict[int, int]                           # vertex (!= 0) -> column
    z_col: Dict[Tuple[int, int], int] = field(default_factory=dict)
    u_col: Dict[Tuple[int, int], int] = field(default_factory=dict)  # arc (v, w)
    theta_col: Dict[int, int] = field(default_factory=dict)
    eta_col: Dict[int, int] = field(default_factory=dict)
    symmetry: str = OFF
    tie_break: str = TIE_LEX

    def branchable(self) -> List[int]:
        """Columns with integrality requirements (x and y only)."""
        return sorted(self.y_col.values()) + sorted(self.x_col.values())

    def column_names(self) -> Dict[int, str]:
        names = {}
        for e, col in self.x_col.items():
            names[col] = f"x{e}"
        for v, col in self.y_col.items():
            names[col] = f"y{v}"
        for (v, w), col in self.z_col.items():
            names[col] = f"z{(v, w)}"
        for (v, w), col in self.u_col.items():
            names[col] = f"u{(v, w)}"
        for v, col in self.theta_col.items():
            names[col] = f"theta{v}"
        for v, col in self.eta_col.items():
            names[col] = f"eta{v}"
        return names

    def y_value(self, x, v: int) -> float:
        """y at a solution vector, with the depot pinned at 1."""
        return 1.0 if v == 0 else x[self.y_col[v]]


def _add_shared_columns(inst: Instance, model: LpModel, handle_kwargs: dict) -> None:
    x_col = {e: model.add_variable(0.0, 1.0) for e in sorted(inst.edges)}
    y_col = {v: model.add_variable(0.0, 1.0, inst.prize[v])
             for v in range(1, inst.n)}
    handle_kwargs["x_col"] = x_col
    handle_kwargs["y_col"] = y_col


def _add_tree_columns(inst: Instance, model: LpModel) -> Dict[Tuple[int, int], int]:
    u_col = {}
    for v, w in sorted(inst.edges):
        u_col[(v, w)] = model.add_variable(0.0, 1.0)
        u_col[(w, v)] = model.add_variable(0.0, 1.0)
    return u_col


def _kind_rows(inst: Instance, model: LpModel, kind: str,
               x_col, y_col, u_col) -> None:
    if kind == TOUR:
        # 2-degree rows: visited vertices have two incident edges, the
        # depot unconditionally so
        for v in range(inst.n):
            coefs = [(x_col[edge_key(v, w)], 1.0) for w in inst.adjacent(v)]
            if v == 0:
                model.add_row(coefs, EQ, 2.0)
            else:
                model.add_row(coefs + [(y_col[v], -2.0)], EQ, 0.0)
        return
    # tree: tie each edge to its two orientations, and pin the edge count
    # to the number of visited customers (the depot adds the +1)
    for e in sorted(inst.edges):
        v, w = e
        model.add_row([(x_col[e], 1.0), (u_col[(v, w)], -1.0),
                       (u_col[(w, v)], -1.0)], EQ, 0.0)
    count = [(x_col[e], 1.0) for e in sorted(inst.edges)]
    count += [(y_col[v], -1.0) for v in range(1, inst.n)]
    model.add_row(count, EQ, 0.0)


def _endpoint_rows(inst: Instance, model: LpModel, kind: str, mode: str,
                   x_col, y_col, z_col) -> None:
    """Edge-endpoint rows, lifted with a coverage term where applicable."""
    for e in sorted(inst.edges):
        for v in e:
            if v == 0:
                continue  # the depot is always visited
            w = e[1] if v == e[0] else e[0]
            coefs = [(x_col[e], 1.0), (y_col[v], -1.0)]
            if (mode == COMPACT and kind == TREE and w != 0
                    and v in inst.neighbourhood[w]):
                # x and z cannot both be 1, and both vanish with y
                model.add_row(coefs + [(z_col[(w, v)], 1.0)], LE, 0.0)
            else:
                model.add_row(coefs, LE, 0.0)


def connectivity_row(handle: ModelHandle, S, k: int,
                     separated: bool = False) -> Tuple[list, str, float]:
    """One connectivity row: edges leaving S must support what S collects.

    ``S`` is a depot-free vertex set containing ``k``.  Tours use
    coefficient 2 (a tour crosses every cut an even number of times).
    Trees state separated rows on arcs entering S; initial rows and all
    tour rows use the undirected edge columns.  In master mode the
    aggregate coverage term joins only when every non-depot coverer of
    ``k`` lies inside S (otherwise it does not aggregate validly).
    """
    inst = handle.instance
    sset = frozenset(S)
    coef = 2.0 if handle.kind == TOUR else 1.0
    use_arcs = handle.kind == TREE and separated

    coefs: List[Tuple[int, float]] = []
    for v in sset:
        for w in inst.adjacent(v):
            if w in sset:
                continue
            if use_arcs:
                coefs.append((handle.u_col[(w, v)], 1.0))  # arc entering S
            else:
                coefs.append((handle.x_col[edge_key(v, w)], 1.0))

    coefs.append((handle.y_col[k], -coef))
    if handle.mode == COMPACT:
        for w in inst.neighbourhood[k]:
            if w in sset:
                coefs.append((handle.z_col[(k, w)], -coef))
    else:
        if set(inst.neighbourhood[k]) - {0} <= sset and k in handle.theta_col:
            coefs.append((handle.theta_col[k], -coef))
    return coefs, GE, 0.0


def _initial_connectivity(handle: ModelHandle) -> None:
    inst = handle.instance
    for v in range(1, inst.n):
        S = (set(inst.neighbourhood[v]) | {v}) - {0}
        coefs, rel, rhs = connectivity_row(handle, S, v)
        handle.model.add_row(coefs, rel, rhs)


def build_compact(inst: Instance, kind: str | None = None) -> ModelHandle:
    """The full model with explicit coverage variables."""
    kind = kind or inst.kind
    model = LpModel()
    kwargs: dict = {}
    _add_shared_columns(inst, model, kwargs)
    x_col, y_col = kwargs["x_col"], kwargs["y_col"]

    z_col = {}
    for v in range(1, inst.n):
        for w in sorted(inst.neighbourhood[v]):
            z_col[(v, w)] = model.add_variable(0.0, 1.0,
                                               inst.coverage_prize[(v, w)])
    u_col = _add_tree_columns(inst, model) if kind == TREE else {}

    handle = ModelHandle(inst, COMPACT, kind, model, x_col, y_col,
                         z_col=z_col, u_col=u_col)

    model.add_row([(x_col[e], inst.cost_of(*e)) for e in sorted(inst.edges)],
                  LE, inst.budget)
    for v in range(1, inst.n):
        coefs = [(y_col[v], 1.0)]
        coefs += [(z_col[(v, w)], 1.0) for w in sorted(inst.neighbourhood[v])]
        model.add_row(coefs, LE, 1.0)
    for w in range(inst.n):
        coverers = inst.coverers_of(w)
        if not coverers:
            continue  # row would be vacuous
        coefs = [(z_col[(v, w)], 1.0) for v in coverers]
        if w == 0:
            model.add_row(coefs, LE, float(inst.capacity[0]))
        else:
            model.add_row(coefs + [(y_col[w], -float(inst.capacity[w]))],
                          LE, 0.0)
    _endpoint_rows(inst, model, kind, COMPACT, x_col, y_col, z_col)
    _kind_rows(inst, model, kind, x_col, y_col, u_col)
    _initial_connectivity(handle)
    return handle


def build_master(inst: Instance, kind: str | None = None) -> ModelHandle:
    """The decomposition master: coverage aggregated per covered vertex.

    Requires coverer-independent prizes; coverage feasibility is delegated
    to the transportation subproblem, so the only capacity kept here is
    the depot's.
    """
    if not inst.independent_coverage_prizes():
        raise DependentPrizes(
            "coverage prizes depend on the covering vertex; "
            "the decomposition needs q identical across each neighbourhood")
    kind = kind or inst.kind
    model = LpModel()
    kwargs: dict = {}
    _add_shared_columns(inst, model, kwargs)
    x_col, y_col = kwargs["x_col"], kwargs["y_col"]

    theta_col = {}
    eta_col = {}
    for v in range(1, inst.n):
        q = inst.coverage_prize_of(v)
        hi = 1.0 if set(inst.neighbourhood[v]) - {0} else 0.0
        theta_col[v] = model.add_variable(0.0, hi, q)
        if 0 in inst.neighbourhood[v]:
            eta_col[v] = model.add_variable(0.0, 1.0, q)
    u_col = _add_tree_columns(inst, model) if kind == TREE else {}

    handle = ModelHandle(inst, MASTER, kind, model, x_col, y_col,
                         u_col=u_col, theta_col=theta_col, eta_col=eta_col)

    model.add_row([(x_col[e], inst.cost_of(*e)) for e in sorted(inst.edges)],
                  LE, inst.budget)
    if eta_col:
        model.add_row([(col, 1.0) for _, col in sorted(eta_col.items())],
                      LE, float(inst.capacity[0]))
    for v in range(1, inst.n):
        coefs = [(y_col[v], 1.0), (theta_col[v], 1.0)]
        if v in eta_col:
            coefs.append((eta_col[v], 1.0))
        model.add_row(coefs, LE, 1.0)
    _endpoint_rows(inst, model, kind, MASTER, x_col, y_col, {})
    _kind_rows(inst, model, kind, x_col, y_col, u_col)
    _initial_connectivity(handle)
    return handle


# ---------------------------------------------------------------------------
# Symmetry breaking

def _edge_sort_key(inst: Instance, e) -> Tuple[float, int, int]:
    return (inst.cost_of(*e), e[0], e[1])


def triangle_candidates(inst: Instance,
                        tie_break: str = TIE_LEX) -> Iterable[Tuple[tuple, int]]:
    """(edge, third vertex) pairs where the edge tops its 3-clique.

    Lexicographic mode orders edges by (cost, endpoints) so every clique
    has a unique maximum; cost mode follows the strict-inequality reading
    and emits nothing on cost ties.
    """
    for a, b, c in combinations(range(inst.n), 3):
        sides = [edge_key(a, b), edge_key(a, c), edge_key(b, c)]
        if not all(inst.has_edge(*e) for e in sides):
            continue
        if tie_break == TIE_LEX:
            top = max(sides, key=lambda e: _edge_sort_key(inst, e))
        else:
            costs = sorted(inst.cost_of(*e) for e in sides)
            if costs[2] <= costs[1]:
                continue
            top = max(sides, key=lambda e: inst.cost_of(*e))
        k = ({a, b, c} - set(top)).pop()
        yield top, k


def quad_candidates(inst: Instance,
                    tie_break: str = TIE_LEX) -> Iterable[Tuple[tuple, tuple]]:
    """Opposite-edge pairs that top their 4-clique's three pairings.

    A pairing's key is (cost sum, its two edge keys in decreasing order);
    forbidding the unique maximum is safe because a 2-opt exchange strictly
    shrinks (tour cost, sorted edge keys).  Cost mode requires the maximum
    sum to be strictly largest.
    """
    for quad in combinations(range(inst.n), 4):
        all_edges = [edge_key(p, q) for p, q in combinations(quad, 2)]
        if not all(inst.has_edge(*e) for e in all_edges):
            continue
        a, b, c, d = quad
        pairings = [(edge_key(a, b), edge_key(c, d)),
                    (edge_key(a, c), edge_key(b, d)),
                    (edge_key(a, d), edge_key(b, c))]

        def cost_sum(pair):
            return inst.cost_of(*pair[0]) + inst.cost_of(*pair[1])

        if tie_break == TIE_LEX:
            def pair_key(pair):
                ks = sorted((_edge_sort_key(inst, e) for e in pair),
                            reverse=True)
                return (cost_sum(pair), ks)
            top = max(pairings, key=pair_key)
        else:
            sums = sorted(cost_sum(p) for p in pairings)
            if sums[2] <= sums[1]:
                continue
            top = max(pairings, key=cost_sum)
        yield top


def symmetry_rows(handle: ModelHandle) -> List[Tuple[list, str, float]]:
    """All symmetry rows for the handle's kind, as add_row triples."""
    inst = handle.instance
    rows = []
    if handle.kind == TREE:
        for (v, w), k in triangle_candidates(inst, handle.tie_break):
            coefs = [(handle.x_col[(v, w)], 1.0)]
            if k == 0:
                # the depot is always visited, so the top edge is banned
                rows.append((coefs, LE, 0.0))
            else:
                rows.append((coefs + [(handle.y_col[k], 1.0)], LE, 1.0))
    else:
        for e1, e2 in quad_candidates(inst, handle.tie_break):
            rows.append(([(handle.x_col[e1], 1.0), (handle.x_col[e2], 1.0)],
                         LE, 1.0))
    return rows


def add_symmetry_breaking(handle: ModelHandle, policy: str,
                          tie_break: str = TIE_LEX) -> ModelHandle:
    """Attach the kind's symmetry family; Lazy defers rows to separation."""
    if policy not in SYMMETRY_POLICIES:
        raise ValueError(f"symmetry policy must be one of {SYMMETRY_POLICIES}")
    if tie_break not in TIE_BREAKS:
        raise ValueError(f"tie break must be one of {TIE_BREAKS}")
    handle.symmetry = policy
    handle.tie_break = tie_break
    if policy == UPFRONT:
        handle.model.add_rows(symmetry_rows(handle))
    return handle


def default_symmetry_policy(kind: str) -> str:
    """Trees take the cubic family upfront; tours defer the quartic one."""
    return UPFRONT if kind == TREE else LAZY
