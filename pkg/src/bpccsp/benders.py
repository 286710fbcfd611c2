"""Feasibility subproblem for the aggregated-coverage master.

Whether a master point's aggregate coverage is realizable by an actual
assignment is a transportation feasibility question, answered here with a
max-flow: customers supply their theta values, facilities absorb up to
``c_w * y_w``.  When flow falls short, the residual-reachable side of the
min cut yields a dual ray whose induced inequality is violated by exactly
the flow deficit.  Depot coverage (eta) never enters: the master already
carries its capacity row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import networkx as nx
from networkx.algorithms.flow import shortest_augmenting_path

from .formulation import DependentPrizes, ModelHandle
from .instance import Instance
from .lp_engine import GE
from .separation import BENDERS, Cut

DEFICIT_TOL = 1e-6   # flow shortfall below this counts as feasible
_SOURCE = ("s",)
_SINK = ("t",)


@dataclass(frozen=True)
class Ray:
    """Dual ray of the infeasible subproblem; induces Σ c_w y_w ≥ Σ θ_v."""

    u_theta: tuple          # ((vertex, coefficient), ...) all negative
    u_y: tuple              # ((vertex, coefficient), ...) all positive
    deficit: float          # violation at the triggering point

    def customers(self) -> tuple:
        return tuple(v for v, _ in self.u_theta)


def _transport_network(inst: Instance, y_vals: Sequence[float],
                       theta_vals: Sequence[float]) -> nx.DiGraph:
    # middle arcs get a finite capacity exceeding the whole demand: no
    # minimum cut ever picks one, so cuts stay in source/sink-arc form
    # (which the ray extraction below relies on), and the flow routine
    # never sees infinite capacities
    bulk = sum(float(theta_vals[v]) for v in range(1, inst.n)) + 1.0
    g = nx.DiGraph()
    for v in range(1, inst.n):
        if theta_vals[v] > 0.0:
            g.add_edge(_SOURCE, ("c", v), capacity=float(theta_vals[v]))
            for w in sorted(inst.neighbourhood[v]):
                if w != 0:
                    g.add_edge(("c", v), ("f", w), capacity=bulk)
    for w in range(1, inst.n):
        cap = inst.capacity[w] * float(y_vals[w])
        if g.has_node(("f", w)):
            g.add_edge(("f", w), _SINK, capacity=max(cap, 0.0))
    return g


def check_subproblem(inst: Instance, y_vals: Sequence[float],
                     theta_vals: Sequence[float]) -> Optional[Ray]:
    """None when the coverage plan is realizable, else a violated Ray.

    The ray's customers are the residual-reachable deficient ones; its
    facilities are everything those customers could use.  Coefficients are
    normalized so the smallest nonzero magnitude is 1.
    """
    if not inst.independent_coverage_prizes():
        raise DependentPrizes("the subproblem applies to independent prizes only")
    demand = sum(theta_vals[v] for v in range(1, inst.n))
    if demand <= DEFICIT_TOL:
        return None
    g = _transport_network(inst, y_vals, theta_vals)
    if not g.has_node(_SINK):
        g.add_node(_SINK)
    value, (reach, _) = nx.minimum_cut(g, _SOURCE, _SINK,
                                       flow_func=shortest_augmenting_path)
    deficit = demand - value
    if deficit <= DEFICIT_TOL:
        return None

    customers = sorted(node[1] for node in reach if node[0] == "c")
    facilities = sorted({w for v in customers
                         for w in inst.neighbourhood[v] if w != 0})
    coefs = [float(inst.capacity[w]) for w in facilities] + [1.0]
    scale = min(c for c in coefs if c > 0.0)
    u_theta = tuple((v, -1.0 / scale) for v in customers)
    u_y = tuple((w, inst.capacity[w] / scale) for w in facilities
                if inst.capacity[w] > 0)
    return Ray(u_theta, u_y, deficit / scale)


def ray_cut(handle: ModelHandle, ray: Ray) -> Cut:
    """The master row induced by a ray: Σ c_w y_w − Σ θ_v ≥ 0."""
    coefs = [(handle.theta_col[v], coef) for v, coef in ray.u_theta]
    coefs += [(handle.y_col[w], coef) for w, coef in ray.u_y]
    return Cut(BENDERS, tuple(coefs), GE, 0.0,
               (BENDERS, frozenset(ray.customers())))


def recover_coverage(inst: Instance, y_vals: Sequence[float],
                     theta_vals: Sequence[float],
                     eta_vals: Sequence[float]) -> Dict[int, int]:
    """Integral coverage realizing a binary master point (flow integrality).

    The non-depot part comes from decomposing an integral max flow; depot
    assignments are read straight off eta.  Raises ``ValueError`` when the
    point is not binary or its subproblem is infeasible (contract breach).
    """
    for v in range(1, inst.n):
        if min(abs(theta_vals[v]), abs(theta_vals[v] - 1.0)) > 1e-6 or \
                min(abs(eta_vals[v]), abs(eta_vals[v] - 1.0)) > 1e-6:
            raise ValueError(f"coverage for vertex {v} is not binary")
    rounded_theta = [round(theta_vals[v]) if v else 0 for v in range(inst.n)]
    g = _transport_network(inst, y_vals, rounded_theta)
    demand = sum(rounded_theta)
    coverage: Dict[int, int] = {}
    if demand:
        value, flow = nx.maximum_flow(g, _SOURCE, _SINK,
                                      flow_func=shortest_augmenting_path)
        if demand - value > DEFICIT_TOL:
            raise ValueError("subproblem infeasible; no coverage exists")
        for v in range(1, inst.n):
            if not rounded_theta[v]:
                continue
            for w, amount in flow[("c", v)].items():
                if amount > 0.5:
                    coverage[v] = w[1]
                    break
    for v in range(1, inst.n):
        if eta_vals[v] > 0.5:
            coverage[v] = 0
    return coverage
