"""Bounded-variable revised simplex over the pivot kernels.

The engine keeps the public surface narrow (build model, solve, duals,
warm-start token, Farkas certificate, LP text dump) so a different backend
could be swapped in behind the same contract.  All numerical work happens in
``kernels.simplex_iterate``; this wrapper owns the two-phase driver,
refactorization, and the final feasibility/optimality audit.  It never
returns silently wrong answers: irrecoverable numerical trouble raises
:class:`NumericalFailure`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bpccsp import kernels

LE = "<="
GE = ">="
EQ = "=="
RELATIONS = (LE, GE, EQ)

FEAS_TOL = 1e-7    # bound/row feasibility
RC_TOL = 1e-7      # reduced-cost (dual) feasibility
INT_TOL = 1e-6     # integrality, used by callers

_CHUNK = 256       # kernel iterations between refactorizations
_MAX_RESTARTS = 40


class LpError(Exception):
    pass


class NumericalFailure(LpError):
    """The simplex could not certify a result within tolerances."""


class LpModel:
    """A maximization LP with bounded variables and <= / >= / == rows."""

    def __init__(self):
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.objective: list[float] = []
        self.rows: list[list] = []       # each: list of (col, coef)
        self.row_rel: list[str] = []
        self.row_rhs: list[float] = []

    # -- construction ------------------------------------------------------

    def add_variable(self, lower: float, upper: float, objective: float = 0.0) -> int:
        if math.isnan(lower) or math.isnan(upper) or not math.isfinite(objective):
            raise ValueError("variable bounds must not be NaN; objective must be finite")
        if lower > upper:
            raise ValueError(f"lower bound {lower} exceeds upper bound {upper}")
        if not (math.isfinite(lower) or math.isfinite(upper)):
            raise ValueError("free variables are not supported; supply one finite bound")
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.objective.append(float(objective))
        return len(self.lower) - 1

    def add_row(self, coefs, rel: str, rhs: float) -> int:
        if rel not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}, got {rel!r}")
        if not math.isfinite(rhs):
            raise ValueError("row right-hand side must be finite")
        seen = set()
        clean = []
        for col, coef in coefs:
            if not (0 <= col < len(self.lower)):
                raise ValueError(f"row references unknown column {col}")
            if col in seen:
                raise ValueError(f"column {col} appears twice in one row")
            seen.add(col)
            if not math.isfinite(coef):
                raise ValueError("row coefficients must be finite")
            if coef != 0.0:
                clean.append((int(col), float(coef)))
        self.rows.append(clean)
        self.row_rel.append(rel)
        self.row_rhs.append(float(rhs))
        return len(self.rows) - 1

    def add_rows(self, triples) -> None:
        """Append (coefs, rel, rhs) triples; a later solve picks them up."""
        for coefs, rel, rhs in triples:
            self.add_row(coefs, rel, rhs)

    def set_bounds(self, col: int, lower: float, upper: float) -> None:
        if not (0 <= col < len(self.lower)):
            raise ValueError(f"unknown column {col}")
        if lower > upper:
            raise ValueError(f"lower bound {lower} exceeds upper bound {upper}")
        self.lower[col] = float(lower)
        self.upper[col] = float(upper)

    @property
    def num_vars(self) -> int:
        return len(self.lower)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def copy(self) -> "LpModel":
        other = LpModel()
        other.lower = list(self.lower)
        other.upper = list(self.upper)
        other.objective = list(self.objective)
        other.rows = [list(r) for r in self.rows]
        other.row_rel = list(self.row_rel)
        other.row_rhs = list(self.row_rhs)
        return other

    # -- diagnostics ---------------------------------------------------------

    def lp_text(self) -> str:
        """Dump in the usual LP text format (for desk debugging)."""

        def term(col, coef, first):
            sign = "" if (first and coef >= 0) else ("+ " if coef >= 0 else "- ")
            return f"{sign}{abs(coef):.12g} x{col}"

        out = ["Maximize"]
        parts = [term(j, c, j == 0) for j, c in enumerate(self.objective) if c]
        out.append(" obj: " + (" ".join(parts) if parts else "0 x0"))
        out.append("Subject To")
        relmap = {LE: "<=", GE: ">=", EQ: "="}
        for i, row in enumerate(self.rows):
            parts = [term(c, v, k == 0) for k, (c, v) in enumerate(row)]
            body = " ".join(parts) if parts else "0 x0"
            out.append(f" c{i}: {body} {relmap[self.row_rel[i]]} {self.row_rhs[i]:.12g}")
        out.append("Bounds")
        for j, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            lo_s = f"{lo:.12g}" if math.isfinite(lo) else "-inf"
            hi_s = f"{hi:.12g}" if math.isfinite(hi) else "+inf"
            out.append(f" {lo_s} <= x{j} <= {hi_s}")
        out.append("End")
        return "\n".join(out) + "\n"


@dataclass
class Basis:
    """Opaque warm-start token (basis column per row + variable statuses)."""
    basis: np.ndarray
    vstat: np.ndarray
    num_vars: int
    num_rows: int


@dataclass
class LpSolution:
    status: str                      # optimal | infeasible | unbounded
    objective: float
    x: np.ndarray | None
    duals: np.ndarray | None
    farkas: np.ndarray | None
    basis: Basis | None
    iterations: int


def _slack_bounds(rel: str):
    if rel == LE:
        return 0.0, np.inf
    if rel == GE:
        return -np.inf, 0.0
    return 0.0, 0.0


class _Tableau:
    """Equality-form data plus the mutable simplex state."""

    def __init__(self, model: LpModel):
        n, m = model.num_vars, model.num_rows
        self.n, self.m = n, m
        ncols = n + m
        at = np.zeros((ncols, m))
        for i, row in enumerate(model.rows):
            for col, coef in row:
                at[col, i] = coef
            at[n + i, i] = 1.0
        self.at = at
        lo = np.empty(ncols)
        hi = np.empty(ncols)
        lo[:n] = model.lower
        hi[:n] = model.upper
        for i, rel in enumerate(model.row_rel):
            lo[n + i], hi[n + i] = _slack_bounds(rel)
        self.lower, self.upper = lo, hi
        cost = np.zeros(ncols)
        cost[:n] = model.objective
        self.cost = cost
        self.b = np.asarray(model.row_rhs, dtype=float)
        self.basis = np.empty(m, dtype=np.int64)
        self.vstat = np.empty(ncols, dtype=np.int8)
        self.xval = np.empty(ncols)
        self.binv = np.eye(m)

    def start_cold(self):
        n, m = self.n, self.m
        self.vstat[:n] = np.where(np.isfinite(self.lower[:n]), 0, 1)
        self.vstat[n:] = 2
        self.basis[:] = n + np.arange(m)
        self.set_nonbasic_values()

    def start_warm(self, token: Basis):
        n, m = self.n, self.m
        m_old = token.num_rows
        self.vstat[: n + m_old] = token.vstat
        self.vstat[n + m_old:] = 2
        self.basis[:m_old] = token.basis
        self.basis[m_old:] = n + np.arange(m_old, m)
        self.set_nonbasic_values()

    def set_nonbasic_values(self):
        at_low = self.vstat == 0
        at_up = self.vstat == 1
        self.xval[at_low] = self.lower[at_low]
        self.xval[at_up] = self.upper[at_up]
        # a nonbasic value stuck on an infinite bound means the status token
        # is stale (bounds changed); park it on the finite side
        bad = at_up & ~np.isfinite(self.xval)
        self.xval[bad] = self.lower[bad]
        self.vstat[bad] = 0
        bad = at_low & ~np.isfinite(self.xval)
        self.xval[bad] = self.upper[bad]
        self.vstat[bad] = 1

    def refactor(self) -> bool:
        """Recompute binv and the basic values from scratch."""
        bmat = self.at[self.basis].T
        try:
            self.binv = np.ascontiguousarray(np.linalg.inv(bmat))
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(self.binv)):
            return False
        nb = self.vstat != 2
        r = self.b - self.xval[nb] @ self.at[nb]
        self.xval[self.basis] = self.binv @ r
        return True

    def infeasibility(self) -> float:
        """Largest bound violation among the basic variables."""
        xb = self.xval[self.basis]
        lo, hi = self.lower[self.basis], self.upper[self.basis]
        below = np.maximum(lo - xb, 0.0)
        above = np.maximum(xb - hi, 0.0)
        below = np.where(np.isfinite(below), below, 0.0)
        above = np.where(np.isfinite(above), above, 0.0)
        return float(max(below.max(initial=0.0), above.max(initial=0.0)))

    def phase1_gradient(self) -> np.ndarray:
        xb = self.xval[self.basis]
        lo, hi = self.lower[self.basis], self.upper[self.basis]
        return (xb > hi + FEAS_TOL).astype(float) - (xb < lo - FEAS_TOL).astype(float)

    def duals(self) -> np.ndarray:
        return self.binv.T @ self.cost[self.basis]

    def farkas_ray(self) -> np.ndarray:
        """Row multipliers certifying phase-1 infeasibility."""
        return self.binv.T @ self.phase1_gradient()

    def dual_violation(self) -> float:
        y = self.duals()
        d = self.cost - self.at @ y
        bad_lo = np.maximum(d[self.vstat == 0], 0.0)
        bad_up = np.maximum(-d[self.vstat == 1], 0.0)
        v = 0.0
        if bad_lo.size:
            v = max(v, float(bad_lo.max()))
        if bad_up.size:
            v = max(v, float(bad_up.max()))
        return v

    def primal_violation(self) -> float:
        lo, hi = self.lower, self.upper
        v = np.maximum(lo - self.xval, 0.0)
        w = np.maximum(self.xval - hi, 0.0)
        v = np.where(np.isfinite(v), v, 0.0)
        w = np.where(np.isfinite(w), w, 0.0)
        return float(max(v.max(initial=0.0), w.max(initial=0.0)))


def solve_lp(model: LpModel, warm_start: Basis | None = None) -> LpSolution:
    """Maximize the model; returns status, point, duals, and a warm-start token.

    Deterministic: identical models and warm starts replay identical pivot
    sequences.  Infeasible models carry a Farkas certificate in ``farkas``
    (row multipliers; see :func:`farkas_gap`).
    """
    t = _Tableau(model)
    n, m = t.n, t.m

    warm_ok = (warm_start is not None and warm_start.num_vars == n
               and warm_start.num_rows <= m)
    if warm_ok:
        t.start_warm(warm_start)
        if not t.refactor():
            warm_ok = False
    if not warm_ok:
        t.start_cold()
        if not t.refactor():
            raise NumericalFailure("singular initial basis")

    bland = False
    total_iters = 0
    iter_cap = 20000 + 200 * (n + m)
    restarts = 0
    infeasible_confirm = 0
    phase = 1 if t.infeasibility() > FEAS_TOL else 2

    while True:
        status, iters, bland = kernels.simplex_iterate(
            t.at, t.lower, t.upper, t.cost, t.basis, t.vstat, t.xval, t.binv,
            phase, bland, _CHUNK, FEAS_TOL)
        total_iters += iters
        if total_iters > iter_cap:
            raise NumericalFailure(f"iteration cap exceeded ({total_iters})")
        if not t.refactor():
            raise NumericalFailure("singular basis after pivoting")

        if status == kernels.ITER_LIMIT:
            continue
        if status == kernels.STALLED:
            restarts += 1
            bland = True
            if restarts > _MAX_RESTARTS:
                raise NumericalFailure("persistent tiny pivots")
            continue
        if status == kernels.UNBOUNDED:
            if phase == 1:
                raise NumericalFailure("phase 1 reported an unbounded direction")
            return LpSolution("unbounded", np.inf, None, None, None, None,
                              total_iters)
        if status == kernels.INFEASIBLE:
            if t.infeasibility() <= FEAS_TOL:
                phase = 2
                infeasible_confirm = 0
                continue
            infeasible_confirm += 1
            if infeasible_confirm < 2:
                continue  # one more pass after refactorization
            farkas = t.farkas_ray()
            return LpSolution("infeasible", -np.inf, None, None, farkas, None,
                              total_iters)
        # status == DONE
        if phase == 1:
            if t.infeasibility() > FEAS_TOL:
                restarts += 1
                if restarts > _MAX_RESTARTS:
                    raise NumericalFailure("phase 1 cannot reach feasibility")
                continue
            phase = 2
            continue
        # phase 2 optimal claim: audit primal and dual feasibility
        if t.infeasibility() > FEAS_TOL or t.primal_violation() > FEAS_TOL:
            phase = 1
            restarts += 1
            if restarts > _MAX_RESTARTS:
                raise NumericalFailure("optimal claim failed the primal audit")
            continue
        if t.dual_violation() > 2 * RC_TOL:
            restarts += 1
            if restarts > _MAX_RESTARTS:
                raise NumericalFailure("optimal claim failed the dual audit")
            continue
        x = t.xval[:n].copy()
        objective = float(np.dot(np.asarray(model.objective), x))
        duals = t.duals()[:m].copy()
        token = Basis(t.basis.copy(), t.vstat.copy(), n, m)
        return LpSolution("optimal", objective, x, duals, None, token,
                          total_iters)


def farkas_gap(model: LpModel, y: np.ndarray) -> float:
    """How strongly ``y`` certifies infeasibility (positive = certified).

    For row multipliers y, every feasible point would satisfy
    ``sum_j (y . a_j) x_j + slack terms = y . b``; the certificate holds when
    the best achievable left side over the variable bounds and row relations
    still falls short of ``y . b``.
    """
    y = np.asarray(y, dtype=float)
    best = 0.0
    for j in range(model.num_vars):
        z = 0.0
        for i, row in enumerate(model.rows):
            for col, coef in row:
                if col == j:
                    z += y[i] * coef
        best += z * (model.upper[j] if z > 0 else model.lower[j])
        if not math.isfinite(best):
            return -math.inf
    for i, rel in enumerate(model.row_rel):
        lo, hi = _slack_bounds(rel)
        z = y[i] if abs(y[i]) > 1e-9 else 0.0
        contrib = z * (hi if z > 0 else lo)
        if math.isnan(contrib):
            contrib = 0.0  # 0 * inf: slack coefficient is exactly zero
        best += contrib
        if not math.isfinite(best):
            return -math.inf
    return float(np.dot(y, model.row_rhs) - best)
