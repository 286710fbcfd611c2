"""Shared fixtures: tiny hand-built instances and the randomized grid."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bpccsp.instance import Instance, make_instance, random_instance

# knobs the randomized suites sweep (small-n analogues of the generator grid)
GRID_BUDGET = (0.25, 0.5, 0.75)
GRID_RADII = (0.5, 1.0, 2.0)
GRID_CAPF = (0.0, 0.1, 0.25)
GRID_RATIO = (0.5, 0.75)


def instance_grid(seed: int, count: int, n_lo: int = 5, n_hi: int = 10,
                  dependent: bool = False):
    """Random Euclidean instances sweeping kind/budget/radius/capacity."""
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(n_lo, n_hi + 1))
        yield random_instance(
            rng, n, ("tour", "tree")[i % 2],
            budget_frac=GRID_BUDGET[i % len(GRID_BUDGET)],
            radius_frac=GRID_RADII[(i // 2) % len(GRID_RADII)],
            capacity_frac=GRID_CAPF[(i // 3) % len(GRID_CAPF)],
            coverage_ratio=GRID_RATIO[i % len(GRID_RATIO)],
            dependent=dependent)


def square_cost():
    """Unit square 0-1-2-3 (sides 1, diagonals sqrt 2), depot at corner 0."""
    coords = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    n = len(coords)
    return [[math.dist(coords[u], coords[v]) for v in range(n)]
            for u in range(n)]


@pytest.fixture
def square_tour() -> Instance:
    return make_instance(
        square_cost(), budget=4.0, prize=[0, 10, 12, 8],
        neighbourhood=[frozenset()] * 4, capacity=[0] * 4, kind="tour",
        name="square-tour")


@pytest.fixture
def square_tree() -> Instance:
    nbhd = [frozenset(), frozenset({0, 2}), frozenset({1, 3}), frozenset({0, 2})]
    cov = {(v, w): 5.0 for v in (1, 2, 3) for w in nbhd[v]}
    return make_instance(
        square_cost(), budget=2.5, prize=[0, 10, 12, 8],
        neighbourhood=nbhd, capacity=[2] * 4, kind="tree",
        coverage_prize=cov, name="square-tree")
