"""Problem data model, validation, solution checking, and the instance generator.

An instance is an undirected graph with edge costs, a travel budget, visit
prizes, per-vertex coverage neighbourhoods with coverage prizes, and facility
capacities.  A solution visits a depot-connected subgraph (cycle or tree)
within budget and assigns unvisited vertices to visited neighbours for the
coverage prizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from bpccsp import kernels

TOUR = "tour"
TREE = "tree"
KINDS = (TOUR, TREE)

BUDGET_TOL = 1e-9
OBJ_TOL = 1e-6

EdgeKey = tuple[int, int]


def edge_key(u: int, v: int) -> EdgeKey:
    return (u, v) if u < v else (v, u)


class InvalidInstance(ValueError):
    """Raised by validate() with every violated invariant listed."""


@dataclass(frozen=True)
class Instance:
    n: int
    edges: tuple[EdgeKey, ...]               # canonical (u < v), no duplicates
    edge_cost: tuple[float, ...]             # parallel to edges
    budget: float
    prize: tuple[float, ...]                 # length n; prize[0] is ignored (0)
    neighbourhood: tuple[frozenset, ...]     # length n; candidates that may cover v
    coverage_prize: dict                     # (v, w) -> prize for covering v by w
    capacity: tuple[int, ...]                # length n
    kind: str                                # "tour" | "tree"
    name: str = ""

    def __post_init__(self):
        cost = {e: c for e, c in zip(self.edges, self.edge_cost)}
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for (u, v) in self.edges:
            if 0 <= u < self.n and 0 <= v < self.n:
                adj[u].append(v)
                adj[v].append(u)
        object.__setattr__(self, "_cost", cost)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    # -- lookups ---------------------------------------------------------

    def cost_of(self, u: int, v: int) -> float:
        return self._cost[edge_key(u, v)]

    def has_edge(self, u: int, v: int) -> bool:
        return edge_key(u, v) in self._cost

    def adjacent(self, v: int) -> tuple:
        return self._adj[v]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def cost_matrix(self) -> np.ndarray:
        d = np.full((self.n, self.n), np.inf)
        np.fill_diagonal(d, 0.0)
        for (u, v), c in zip(self.edges, self.edge_cost):
            d[u, v] = d[v, u] = c
        return d

    def coverers_of(self, w: int) -> tuple:
        """Vertices v whose neighbourhood contains w (i.e. w may cover v)."""
        return tuple(v for v in range(1, self.n) if w in self.neighbourhood[v])

    def independent_coverage_prizes(self) -> bool:
        """True when the coverage prize of v does not depend on the coverer."""
        for v in range(1, self.n):
            qs = {self.coverage_prize[(v, w)] for w in self.neighbourhood[v]}
            if len(qs) > 1:
                return False
        return True

    def coverage_prize_of(self, v: int) -> float:
        """The coverer-independent prize of v (0.0 if v has no neighbourhood)."""
        for w in self.neighbourhood[v]:
            return self.coverage_prize[(v, w)]
        return 0.0


@dataclass
class Solution:
    status: str                 # optimal | feasible | infeasible | time_limit
    objective: float
    bound: float
    visited: frozenset
    edges: tuple                # canonical edge keys
    coverage: dict              # covered vertex -> covering vertex
    stats: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "feasible", "time_limit") and \
            math.isfinite(self.objective)


def solution_objective(instance: Instance, visited, coverage) -> float:
    total = sum(instance.prize[v] for v in visited if v != 0)
    total += sum(instance.coverage_prize[(v, w)] for v, w in coverage.items())
    return total


def instance_violations(instance: Instance) -> list:
    """Every violated data invariant, as human-readable strings."""
    errs = []
    n = instance.n
    if n < 1:
        errs.append(f"vertex count must be >= 1, got {n}")
        return errs
    if instance.kind not in KINDS:
        errs.append(f"kind must be one of {KINDS}, got {instance.kind!r}")
    if not (math.isfinite(instance.budget) and instance.budget > 0):
        errs.append(f"budget must be positive, got {instance.budget}")

    seen = set()
    for (u, v), c in zip(instance.edges, instance.edge_cost):
        if not (0 <= u < n and 0 <= v < n):
            errs.append(f"edge ({u},{v}) has an endpoint outside 0..{n - 1}")
            continue
        if u >= v:
            errs.append(f"edge ({u},{v}) is not in canonical (u < v) form")
        if (u, v) in seen:
            errs.append(f"duplicate edge ({u},{v})")
        seen.add((u, v))
        if not (math.isfinite(c) and c >= 0):
            errs.append(f"edge ({u},{v}) cost must be finite and >= 0, got {c}")

    if len(instance.prize) != n:
        errs.append(f"prize vector has length {len(instance.prize)}, expected {n}")
    else:
        for v, p in enumerate(instance.prize):
            if v and not (math.isfinite(p) and p >= 0):
                errs.append(f"prize[{v}] must be finite and >= 0, got {p}")

    if len(instance.capacity) != n:
        errs.append(f"capacity vector has length {len(instance.capacity)}, expected {n}")
    else:
        for v, c in enumerate(instance.capacity):
            if not (isinstance(c, (int, np.integer)) and c >= 0):
                errs.append(f"capacity[{v}] must be a nonnegative integer, got {c!r}")

    if len(instance.neighbourhood) != n:
        errs.append(f"neighbourhood list has length {len(instance.neighbourhood)}, expected {n}")
    else:
        if instance.neighbourhood[0]:
            errs.append("the depot must have an empty neighbourhood (it is never covered)")
        expected_q = set()
        for v in range(1, n):
            for w in instance.neighbourhood[v]:
                if not (0 <= w < n):
                    errs.append(f"neighbourhood[{v}] contains unknown vertex {w}")
                elif w == v:
                    errs.append(f"neighbourhood[{v}] must not contain v itself")
                else:
                    expected_q.add((v, w))
        got_q = set(instance.coverage_prize)
        for key in sorted(expected_q - got_q):
            errs.append(f"missing coverage prize for {key}")
        for key in sorted(got_q - expected_q):
            errs.append(f"coverage prize for {key} is on a non-neighbour")
        for key, q in instance.coverage_prize.items():
            if key in expected_q and not (math.isfinite(q) and q >= 0):
                errs.append(f"coverage prize {key} must be finite and >= 0, got {q}")
    return errs


def validate(instance: Instance) -> Instance:
    """Raise InvalidInstance listing every violated invariant; else return it."""
    errs = instance_violations(instance)
    if errs:
        raise InvalidInstance(
            f"invalid instance {instance.name!r}:\n  " + "\n  ".join(errs))
    return instance


def check_solution(instance: Instance, solution: Solution) -> list:
    """Feasibility violations of a solution (empty list = feasible).

    Unknown vertex or edge identifiers are structural errors and raise
    ValueError instead of being reported as violations.
    """
    n = instance.n
    for v in solution.visited:
        if not (0 <= v < n):
            raise ValueError(f"unknown vertex {v} in visited set")
    for e in solution.edges:
        u, v = e
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"unknown endpoint in edge {e}")
        if edge_key(u, v) not in instance._cost:
            raise ValueError(f"edge {e} does not exist in the instance")
    for v, w in solution.coverage.items():
        if not (0 <= v < n and 0 <= w < n):
            raise ValueError(f"unknown vertex in coverage entry {v}->{w}")

    if solution.status == "infeasible" or not math.isfinite(solution.objective):
        return []

    errs = []
    visited = set(solution.visited)
    if 0 not in visited:
        errs.append("depot 0 must be visited")
        visited.add(0)

    deg = {v: 0 for v in visited}
    used = 0.0
    seen_edges = set()
    for e in solution.edges:
        k = edge_key(*e)
        if k in seen_edges:
            errs.append(f"edge {k} appears twice")
        seen_edges.add(k)
        used += instance._cost[k]
        for end in k:
            if end not in deg:
                errs.append(f"edge {k} touches unvisited vertex {end}")
            else:
                deg[end] += 1
    if used > instance.budget + BUDGET_TOL:
        errs.append(f"budget exceeded: {used} > {instance.budget}")

    # connectivity of the visited subgraph
    if visited:
        comp = {0}
        frontier = [0]
        adj: dict = {v: [] for v in visited}
        for (u, v) in seen_edges:
            if u in adj and v in adj:
                adj[u].append(v)
                adj[v].append(u)
        while frontier:
            u = frontier.pop()
            for v in adj[u]:
                if v not in comp:
                    comp.add(v)
                    frontier.append(v)
        if comp != visited:
            errs.append("visited subgraph is not connected to the depot")

    if instance.kind == TREE:
        if len(seen_edges) != len(visited) - 1:
            errs.append(
                f"tree must have |visited|-1 edges, got {len(seen_edges)} for {len(visited)} vertices")
    else:
        if len(visited) == 1:
            errs.append("a tour must visit at least 3 vertices")
        else:
            if len(visited) < 3:
                errs.append("a tour must visit at least 3 vertices")
            bad = [v for v, d in deg.items() if d != 2]
            if bad:
                errs.append(f"tour vertices must have degree 2, violated at {sorted(bad)}")
            if len(seen_edges) != len(visited):
                errs.append("tour must have exactly |visited| edges")

    counts: dict = {}
    for v, w in solution.coverage.items():
        if v in visited:
            errs.append(f"covered vertex {v} is also visited")
        if w not in visited:
            errs.append(f"coverer {w} of {v} is not visited")
        if w not in instance.neighbourhood[v]:
            errs.append(f"coverer {w} is not in the neighbourhood of {v}")
        counts[w] = counts.get(w, 0) + 1
    for w, k in counts.items():
        if k > instance.capacity[w]:
            errs.append(f"capacity of {w} exceeded: covers {k} > {instance.capacity[w]}")

    want = solution_objective(instance, solution.visited, solution.coverage)
    if abs(want - solution.objective) > OBJ_TOL:
        errs.append(f"objective {solution.objective} != recomputed {want}")
    if solution.bound + OBJ_TOL < solution.objective:
        errs.append(f"bound {solution.bound} below objective {solution.objective}")
    return errs


# -- construction helpers -------------------------------------------------


def make_instance(cost, budget, prize, neighbourhood, capacity, kind,
                  coverage_prize=None, coverage_ratio=None, name="") -> Instance:
    """Build an instance from a dense cost matrix (np.inf = missing edge).

    ``coverage_prize`` may be a full (v, w) -> q dict; otherwise prizes are
    coverer-independent ``coverage_ratio * prize[v]``.
    """
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    edges = []
    costs = []
    for u in range(n):
        for v in range(u + 1, n):
            if math.isfinite(cost[u, v]):
                edges.append((u, v))
                costs.append(float(cost[u, v]))
    nbhd = tuple(frozenset(s) for s in neighbourhood)
    if coverage_prize is None:
        ratio = 0.0 if coverage_ratio is None else coverage_ratio
        coverage_prize = {(v, w): ratio * prize[v]
                          for v in range(1, n) for w in nbhd[v]}
    return Instance(
        n=n, edges=tuple(edges), edge_cost=tuple(costs), budget=float(budget),
        prize=tuple(float(p) for p in prize), neighbourhood=nbhd,
        coverage_prize=dict(coverage_prize),
        capacity=tuple(int(c) for c in capacity), kind=kind, name=name)


# -- generator -------------------------------------------------------------


@dataclass(frozen=True)
class BaseInstance:
    """A raw base: coordinates plus optional demands (from a TSPLIB-style file)."""
    name: str
    coords: tuple              # ((x, y), ...)
    demands: tuple | None = None
    declared_type: str = "TSP"

    @property
    def n(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class BaseReference:
    """Known optima used to derive budgets and radii for large named bases."""
    n: int
    tsp: float
    avg: float
    mst: float


KNOWN_BASES = {
    "p4": BaseReference(151, 707.86, 33.47, 635.28),
    "p5": BaseReference(200, 776.44, 32.91, 691.97),
    "X-n162-k11": BaseReference(162, 9174.95, 491.56, 7903.35),
    "X-n195-k51": BaseReference(195, 10221.68, 496.46, 8882.14),
    "ch150": BaseReference(150, 6530.90, 359.31, 5880.96),
    "kroa200": BaseReference(200, 29369.41, 1701.17, 25932.60),
}


def round_half_away(x: float) -> int:
    """Round with halves away from zero (0.5 -> 1), for capacities."""
    return int(math.floor(x + 0.5)) if x >= 0 else -round_half_away(-x)


def derive_parameters(n: int, kind: str, reference: BaseReference,
                      budget_frac: float, radius_frac: float,
                      capacity_frac: float):
    """(budget, radius, capacity) from the fraction knobs and reference optima."""
    base_value = reference.tsp if kind == TOUR else reference.mst
    budget = budget_frac * base_value
    radius = radius_frac * reference.avg
    cap = round_half_away(capacity_frac * n)
    return budget, radius, cap


def euclidean_costs(coords, integer_costs: bool = False) -> np.ndarray:
    pts = np.asarray(coords, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    if integer_costs:
        d = np.floor(d + 0.5)  # classic TSPLIB nint rounding
    np.fill_diagonal(d, 0.0)
    return d


def _pairwise_mean(d: np.ndarray) -> float:
    n = d.shape[0]
    iu = np.triu_indices(n, k=1)
    return float(d[iu].mean()) if n > 1 else 0.0


def reference_tsp_cost(d: np.ndarray) -> float:
    """Optimal cycle cost through all vertices (subset DP; small n only)."""
    n = d.shape[0]
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    dp = kernels.held_karp_table(d)
    full = (1 << (n - 1)) - 1
    return float(np.min(dp[full] + d[1:, 0]))


def generate(base: BaseInstance, kind: str, budget_frac: float,
             radius_frac: float, capacity_frac: float, coverage_ratio: float,
             *, integer_costs: bool = False,
             reference: BaseReference | None = None) -> Instance:
    """Derive a complete-graph instance from a base point set.

    Deterministic: identical inputs produce identical instances.  The travel
    budget is ``budget_frac`` times the base's optimal cycle (tour kind) or
    spanning tree (tree kind); neighbourhood radii are ``radius_frac`` times
    the mean pairwise cost; capacities are ``capacity_frac * n`` rounded with
    halves away from zero.  Visit prizes come from the base's demands when
    present, else from the deterministic formula ``1 + (7141 v + 73) mod 100``.
    Coverage prizes are ``coverage_ratio * prize[v]`` (coverer-independent).

    For the six bundled named bases (and any caller-supplied ``reference``)
    the budget/radius derivation uses the known reference optima; otherwise
    they are computed from the coordinates (cycle costs only up to the
    Held-Karp kernel limit).
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    n = base.n
    d = euclidean_costs(base.coords, integer_costs)
    ref = reference or KNOWN_BASES.get(base.name)
    if ref is not None and ref.n != n:
        raise ValueError(
            f"reference is for n={ref.n} but base {base.name!r} has n={n}")
    if ref is None:
        avg = _pairwise_mean(d)
        mst = kernels.mst_cost(d)
        if kind == TOUR:
            if n > kernels.HELD_KARP_MAX:
                raise ValueError(
                    f"no reference optimum for base {base.name!r} and n={n} is too"
                    f" large for the built-in cycle solver (max {kernels.HELD_KARP_MAX});"
                    " pass reference=BaseReference(...)")
            ref = BaseReference(n, reference_tsp_cost(d), avg, mst)
        else:
            ref = BaseReference(n, math.nan, avg, mst)

    budget, radius, cap = derive_parameters(
        n, kind, ref, budget_frac, radius_frac, capacity_frac)

    if base.demands is not None:
        if len(base.demands) != n:
            raise ValueError("demand vector length does not match the base")
        prize = [float(q) for q in base.demands]
        prize[0] = 0.0
    else:
        prize = [0.0] + [float(1 + (7141 * v + 73) % 100) for v in range(1, n)]

    nbhd = [frozenset()]
    for v in range(1, n):
        nbhd.append(frozenset(w for w in range(n) if w != v and d[v, w] <= radius))
    coverage_prize = {(v, w): coverage_ratio * prize[v]
                      for v in range(1, n) for w in nbhd[v]}

    name = (f"{base.name}|{kind}|b{budget_frac:g}|r{radius_frac:g}"
            f"|c{capacity_frac:g}|q{coverage_ratio:g}")
    return Instance(
        n=n,
        edges=tuple((u, v) for u in range(n) for v in range(u + 1, n)),
        edge_cost=tuple(float(d[u, v]) for u in range(n) for v in range(u + 1, n)),
        budget=float(budget), prize=tuple(prize), neighbourhood=tuple(nbhd),
        coverage_prize=coverage_prize, capacity=tuple([cap] * n), kind=kind,
        name=name)


def random_instance(rng: np.random.Generator, n: int, kind: str,
                    budget_frac: float = 0.5, radius_frac: float = 1.0,
                    capacity: int | None = None, capacity_frac: float = 0.02,
                    coverage_ratio: float = 0.5, *,
                    dependent: bool = False, coord_range: float = 100.0) -> Instance:
    """Random Euclidean instance through the same derivation as generate().

    Prizes are uniform integers in [1, 100] (passed through the demand path).
    ``capacity`` overrides the fraction-derived value; ``dependent=True``
    perturbs coverage prizes per coverer (exercises the dependent-prize
    code paths that Benders must reject).
    """
    coords = rng.uniform(0.0, coord_range, size=(n, 2))
    demands = [0.0] + [float(x) for x in rng.integers(1, 101, size=n - 1)]
    base = BaseInstance(name=f"random-n{n}", coords=tuple(map(tuple, coords)),
                        demands=tuple(demands), declared_type="VRP")
    inst = generate(base, kind, budget_frac, radius_frac, capacity_frac,
                    coverage_ratio)
    if capacity is not None:
        inst = replace(inst, capacity=tuple([int(capacity)] * n))
    if dependent:
        q = {key: float(val * rng.uniform(0.5, 1.5))
             for key, val in inst.coverage_prize.items()}
        inst = replace(inst, coverage_prize=q, name=inst.name + "|dep")
    return inst
