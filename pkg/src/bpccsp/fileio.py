"""File formats: TSPLIB bases, instance JSON, solution reports, bench tables.

TSPLIB files are 1-based; everything internal is 0-based with file vertex 1
as the depot (index 0).  Solution reports are line-oriented (diff-friendly,
sections STATUS/OBJECTIVE/BOUND/VISITED/EDGES/COVERAGE/STATS) and round-trip
losslessly; a JSON variant with the same schema is available for tooling.
"""

from __future__ import annotations

import json
import math
from typing import Iterable, List, Sequence

from .instance import BaseInstance, Instance, Solution, edge_key, make_instance


class ParseError(ValueError):
    """Malformed input file; message carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# ---------------------------------------------------------------------------
# TSPLIB bases

_WEIGHT_TYPES_OK = {"EUC_2D"}
_BASE_TYPES = {"TSP", "VRP", "CVRP"}
_SECTION_BREAKS = {"EOF", "NODE_COORD_SECTION", "DEMAND_SECTION",
                   "DEPOT_SECTION"}


def parse_base(text: str) -> BaseInstance:
    """Parse a TSPLIB-style base file (EUC_2D node coordinates only).

    Recognized keywords: NAME, TYPE, COMMENT, DIMENSION, CAPACITY,
    EDGE_WEIGHT_TYPE, NODE_COORD_SECTION, DEMAND_SECTION, DEPOT_SECTION,
    EOF.  File vertex ``i`` becomes internal vertex ``i - 1``; a depot
    section, when present, must name file vertex 1.
    """
    name = ""
    declared = "TSP"
    dimension = -1
    coords: dict = {}
    demands: dict = {}
    saw_coords = False
    saw_demands = False

    lines = text.splitlines()
    i = 0

    def keyword_value(line):
        if ":" in line:
            key, _, val = line.partition(":")
            return key.strip().upper(), val.strip()
        parts = line.split(None, 1)
        return parts[0].upper(), (parts[1].strip() if len(parts) > 1 else "")

    while i < len(lines):
        raw = lines[i].strip()
        i += 1
        if not raw:
            continue
        key, val = keyword_value(raw)
        if key == "EOF":
            break
        if key == "NAME":
            name = val
        elif key == "TYPE":
            declared = val.upper()
            if declared not in _BASE_TYPES:
                raise ParseError(i, f"unsupported TYPE {val!r}")
        elif key == "DIMENSION":
            try:
                dimension = int(val)
            except ValueError:
                raise ParseError(i, f"DIMENSION is not an integer: {val!r}")
        elif key == "EDGE_WEIGHT_TYPE":
            if val.upper() not in _WEIGHT_TYPES_OK:
                raise ParseError(i, f"unsupported EDGE_WEIGHT_TYPE {val!r} (need EUC_2D)")
        elif key == "NODE_COORD_SECTION":
            if dimension < 1:
                raise ParseError(i, "NODE_COORD_SECTION before a valid DIMENSION")
            saw_coords = True
            for _ in range(dimension):
                if i >= len(lines):
                    raise ParseError(len(lines), "dimension mismatch: coordinate list is short")
                parts = lines[i].split()
                i += 1
                if parts and parts[0].upper() in _SECTION_BREAKS:
                    raise ParseError(i, "dimension mismatch: coordinate list is short")
                if len(parts) != 3:
                    raise ParseError(i, f"expected 'id x y', got {lines[i - 1]!r}")
                try:
                    vid, x, y = int(parts[0]), float(parts[1]), float(parts[2])
                except ValueError:
                    raise ParseError(i, f"bad coordinate line {lines[i - 1]!r}")
                if not 1 <= vid <= dimension or vid in coords:
                    raise ParseError(i, f"bad or repeated vertex id {vid}")
                coords[vid] = (x, y)
        elif key == "DEMAND_SECTION":
            if dimension < 1:
                raise ParseError(i, "DEMAND_SECTION before a valid DIMENSION")
            saw_demands = True
            for _ in range(dimension):
                if i >= len(lines):
                    raise ParseError(len(lines), "dimension mismatch: demand list is short")
                parts = lines[i].split()
                i += 1
                if parts and parts[0].upper() in _SECTION_BREAKS:
                    raise ParseError(i, "dimension mismatch: demand list is short")
                if len(parts) != 2:
                    raise ParseError(i, f"expected 'id demand', got {lines[i - 1]!r}")
                try:
                    vid, dem = int(parts[0]), float(parts[1])
                except ValueError:
                    raise ParseError(i, f"bad demand line {lines[i - 1]!r}")
                if not 1 <= vid <= dimension or vid in demands:
                    raise ParseError(i, f"bad or repeated vertex id {vid}")
                if dem < 0:
                    raise ParseError(i, f"negative demand for vertex {vid}")
                demands[vid] = dem
        elif key == "DEPOT_SECTION":
            while i < len(lines) and lines[i].strip() not in ("-1", ""):
                if lines[i].split()[0] != "1":
                    raise ParseError(i + 1, "only file vertex 1 may be the depot")
                i += 1
            i += 1  # consume the -1 terminator
        # unknown keywords (COMMENT, CAPACITY, ...) are carried over silently

    if not saw_coords:
        raise ParseError(len(lines), "missing NODE_COORD_SECTION")
    if len(coords) != dimension:
        raise ParseError(len(lines), "dimension mismatch: coordinate list is short")
    if saw_demands and len(demands) != dimension:
        raise ParseError(len(lines), "dimension mismatch: demand list is short")

    coord_tuple = tuple(coords[v] for v in range(1, dimension + 1))
    demand_tuple = (tuple(demands[v] for v in range(1, dimension + 1))
                    if saw_demands else None)
    return BaseInstance(name=name, coords=coord_tuple, demands=demand_tuple,
                        declared_type=declared)


def read_base(path) -> BaseInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_base(fh.read())


# ---------------------------------------------------------------------------
# Instance JSON

def instance_to_dict(instance: Instance) -> dict:
    return {
        "name": instance.name,
        "kind": instance.kind,
        "n": instance.n,
        "budget": instance.budget,
        "edges": [[u, v, instance.cost_of(u, v)] for u, v in instance.edges],
        "prize": list(instance.prize),
        "capacity": list(instance.capacity),
        "neighbourhood": [sorted(nb) for nb in instance.neighbourhood],
        "coverage_prize": [[v, w, q] for (v, w), q in
                           sorted(instance.coverage_prize.items())],
    }


def instance_from_dict(data: dict) -> Instance:
    n = data["n"]
    cost = [[math.inf] * n for _ in range(n)]
    for v in range(n):
        cost[v][v] = 0.0
    for u, v, c in data["edges"]:
        cost[u][v] = cost[v][u] = c
    return make_instance(
        cost, data["budget"], data["prize"],
        [frozenset(nb) for nb in data["neighbourhood"]],
        data["capacity"], data["kind"],
        coverage_prize={(v, w): q for v, w, q in data["coverage_prize"]},
        name=data.get("name", ""))


def write_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=1)
        fh.write("\n")


def read_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Solution reports

def _fmt(x) -> str:
    """Lossless text for report values (repr round-trips Python floats)."""
    return repr(float(x)) if isinstance(x, float) else str(x)


def solution_used_budget(instance: Instance, solution: Solution) -> float:
    return sum(instance.cost_of(u, v) for u, v in solution.edges)


def write_solution(solution: Solution, instance: Instance | None = None) -> str:
    """Render a solution report; see :func:`read_solution` for the inverse."""
    out: List[str] = []
    out.append("STATUS " + solution.status)
    out.append("OBJECTIVE " + _fmt(float(solution.objective)))
    out.append("BOUND " + _fmt(float(solution.bound)))
    if instance is not None:
        out.append("BUDGET_USED " + _fmt(solution_used_budget(instance, solution)))
    out.append("VISITED " + " ".join(str(v) for v in sorted(solution.visited)))
    out.append("EDGES %d" % len(solution.edges))
    for u, v in sorted(solution.edges):
        out.append(f"{u} {v}")
    out.append("COVERAGE %d" % len(solution.coverage))
    for v in sorted(solution.coverage):
        out.append(f"{v} {solution.coverage[v]}")
    out.append("STATS %d" % len(solution.stats))
    for k in sorted(solution.stats):
        out.append(f"{k} {_fmt(solution.stats[k])}")
    out.append("END")
    return "\n".join(out) + "\n"


def _parse_stat(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def read_solution(text: str) -> Solution:
    """Parse a report produced by :func:`write_solution`."""
    lines = [ln for ln in text.splitlines()]
    pos = 0

    def take(prefix):
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines) or not lines[pos].startswith(prefix + " "):
            got = lines[pos] if pos < len(lines) else "<eof>"
            raise ParseError(pos + 1, f"expected {prefix}, got {got!r}")
        val = lines[pos][len(prefix) + 1:]
        pos += 1
        return val

    def take_block(prefix):
        nonlocal pos
        header = take(prefix)
        try:
            count = int(header.split()[0]) if header.split() else 0
        except ValueError:
            raise ParseError(pos, f"bad {prefix} count {header!r}")
        rows = []
        for _ in range(count):
            if pos >= len(lines):
                raise ParseError(len(lines), f"truncated {prefix} block")
            rows.append(lines[pos].split(None, 1))
            pos += 1
        return rows

    status = take("STATUS").strip()
    objective = float(take("OBJECTIVE"))
    bound = float(take("BOUND"))
    # budget-used is derived data; present for humans, skipped on read
    while pos < len(lines) and lines[pos].startswith("BUDGET_USED "):
        pos += 1
    visited = frozenset(int(v) for v in take("VISITED").split())
    edges = tuple(edge_key(int(u), int(v)) for u, v in take_block("EDGES"))
    coverage = {int(v): int(w) for v, w in take_block("COVERAGE")}
    stats = {k: _parse_stat(v) for k, v in take_block("STATS")}
    return Solution(status, objective, bound, visited, edges, coverage, stats)


def solution_to_dict(solution: Solution, instance: Instance | None = None) -> dict:
    data = {
        "status": solution.status,
        "objective": float(solution.objective),
        "bound": float(solution.bound),
        "visited": sorted(solution.visited),
        "edges": [list(e) for e in sorted(solution.edges)],
        "coverage": {str(v): w for v, w in sorted(solution.coverage.items())},
        "stats": dict(solution.stats),
    }
    if instance is not None:
        data["budget_used"] = solution_used_budget(instance, solution)
    return data


def solution_from_dict(data: dict) -> Solution:
    return Solution(
        data["status"], float(data["objective"]), float(data["bound"]),
        frozenset(data["visited"]),
        tuple(edge_key(u, v) for u, v in data["edges"]),
        {int(v): w for v, w in data["coverage"].items()},
        dict(data["stats"]))


# ---------------------------------------------------------------------------
# Bench manifests and tables

_MANIFEST_KEYS = {
    "base": str, "subgraph": str,
    "budget-frac": float, "radius-frac": float, "capacity-frac": float,
    "coverage-ratio": float, "time-limit": float, "seed": int,
    "integer-costs": str,
}
_MANIFEST_LISTS = {"subgraph", "budget-frac", "radius-frac", "capacity-frac",
                   "coverage-ratio"}


def parse_manifest(text: str) -> List[dict]:
    """Expand a bench manifest into one job dict per parameter combination.

    A stanza starts with a ``base`` line and ends at the next blank line;
    grid keys (``subgraph``, ``budget-frac``, ``radius-frac``,
    ``capacity-frac``, ``coverage-ratio``) take space-separated value lists
    and are crossed; scalar keys (``time-limit``, ``seed``,
    ``integer-costs``) apply to the whole stanza.
    """
    jobs: List[dict] = []
    stanza: dict = {}

    def flush(line_no):
        if not stanza:
            return
        if "base" not in stanza:
            raise ParseError(line_no, "stanza has no base line")
        grid = [("subgraph", stanza.get("subgraph", ["tour"])),
                ("budget-frac", stanza.get("budget-frac", [0.5])),
                ("radius-frac", stanza.get("radius-frac", [1.0])),
                ("capacity-frac", stanza.get("capacity-frac", [0.02])),
                ("coverage-ratio", stanza.get("coverage-ratio", [0.5]))]
        combos = [dict()]
        for key, values in grid:
            combos = [dict(c, **{key: v}) for c in combos for v in values]
        for combo in combos:
            job = {"base": stanza["base"]}
            job.update(combo)
            for key in ("time-limit", "seed", "integer-costs"):
                if key in stanza:
                    job[key] = stanza[key]
            jobs.append(job)
        stanza.clear()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            flush(line_no)
            continue
        parts = line.split()
        key = parts[0]
        if key not in _MANIFEST_KEYS:
            raise ParseError(line_no, f"unknown manifest key {key!r}")
        if len(parts) < 2:
            raise ParseError(line_no, f"manifest key {key!r} has no value")
        cast = _MANIFEST_KEYS[key]
        try:
            values = [cast(p) for p in parts[1:]]
        except ValueError:
            raise ParseError(line_no, f"bad value for {key!r}: {line!r}")
        if key in _MANIFEST_LISTS:
            stanza[key] = values
        else:
            if len(values) != 1:
                raise ParseError(line_no, f"{key!r} takes a single value")
            stanza[key] = values[0]
        if key == "base" and len(parts) != 2:
            raise ParseError(line_no, "base takes a single value")
    flush(len(text.splitlines()))
    return jobs


def format_table(headers: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Tab-separated table with a header line; floats get 2 decimals."""
    def cell(x):
        if isinstance(x, float):
            return "inf" if math.isinf(x) else f"{x:.2f}"
        return str(x)

    out = ["\t".join(headers)]
    out.extend("\t".join(cell(c) for c in row) for row in rows)
    return "\n".join(out) + "\n"
