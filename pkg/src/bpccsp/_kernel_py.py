"""Pure-Python (numpy) implementations of the numeric kernels.

These mirror ``bpccsp._kernel`` (the compiled Cython module); the public
selector lives in :mod:`bpccsp.kernels`.  Both kernels implement the same
pivot rules, so either one is deterministic run-to-run; they are not
guaranteed bit-identical to each other (BLAS vs. C summation order).
"""

from __future__ import annotations

import numpy as np

COMPILED = False

# simplex_iterate status codes (shared with the compiled kernel)
ITER_LIMIT = 0
DONE = 1          # phase 1: feasible reached / phase 2: optimal
UNBOUNDED = 2
INFEASIBLE = 3    # phase 1 optimum with positive infeasibility
STALLED = 4       # pivot element too small; caller should refactorize

# upper bound on vertices for the pure Held-Karp table (memory/time)
HELD_KARP_MAX = 16

_TIE = 1e-12


def simplex_iterate(at, lower, upper, cost, basis, vstat, xval, binv,
                    phase, bland, max_iter, tol):
    """Run bounded-variable primal simplex pivots in place.

    ``at`` is the column-major constraint matrix (ncols x m) of the
    equality form; ``basis``/``vstat``/``xval``/``binv`` are the mutable
    state arrays.  Returns ``(status, iterations, bland)``.

    Phase 1 minimizes the total bound violation of the basic variables
    (composite objective, recomputed every iteration); phase 2 maximizes
    ``cost``.  Entering variable: Dantzig rule on reduced costs, switching
    to Bland's rule after a degenerate stall.  Leaving variable: smallest
    ratio, ties broken by smallest column index.
    """
    ncols, m = at.shape
    degen_run = 0
    dtol = max(tol, 1e-9)
    inf = np.inf

    for it in range(max_iter):
        lo_b = lower[basis]
        up_b = upper[basis]
        xb = xval[basis]

        if phase == 1:
            below = xb < lo_b - tol
            above = xb > up_b + tol
            if not (below.any() or above.any()):
                return DONE, it, bland
            g = above.astype(float) - below.astype(float)
            y = binv.T @ g
            d = at @ y
        else:
            y = binv.T @ cost[basis]
            d = cost - at @ y

        can_up = (vstat == 0) & (d > dtol)
        can_dn = (vstat == 1) & (d < -dtol)
        elig = np.flatnonzero(can_up | can_dn)
        if elig.size == 0:
            return (DONE if phase == 2 else INFEASIBLE), it, bland

        if bland:
            j = int(elig[0])
        else:
            j = int(elig[np.argmax(np.abs(d[elig]))])
        s = 1.0 if can_up[j] else -1.0

        w = binv @ at[j]
        rate = -s * w  # d(x_B)/dt for step size t >= 0

        # ratio test: distance each basic variable allows
        rising = rate > dtol
        falling = rate < -dtol
        if phase == 1:
            # infeasible-below basics block only when rising (at their lower
            # bound); infeasible-above only when falling (at their upper)
            hi_target = np.where(above, inf, up_b)
            lo_target = np.where(below, -inf, lo_b)
            hi_target = np.where(below & rising, lo_b, hi_target)
            lo_target = np.where(above & falling, up_b, lo_target)
        else:
            hi_target = up_b
            lo_target = lo_b
        with np.errstate(invalid="ignore"):
            tk = np.where(rising & (hi_target < inf),
                          (hi_target - xb) / np.where(rising, rate, 1.0), inf)
            tk = np.where(falling & (lo_target > -inf),
                          (lo_target - xb) / np.where(falling, rate, 1.0), tk)
        np.maximum(tk, 0.0, out=tk)

        tmax = upper[j] - lower[j]  # bound-flip distance (may be inf)
        tmin = tk.min() if m else inf
        if tmax <= tmin:
            if tmax == inf:
                return UNBOUNDED, it, bland
            # bound flip, no basis change
            xval[basis] = xb - s * tmax * w
            xval[j] = upper[j] if s > 0 else lower[j]
            vstat[j] = 1 - vstat[j]
            degen_run = 0
            continue

        ties = np.flatnonzero(tk <= tmin + _TIE)
        leave = int(ties[np.argmin(basis[ties])])
        piv = w[leave]
        if abs(piv) < 1e-9:
            return STALLED, it, bland

        if tmin <= 1e-12:
            degen_run += 1
            if degen_run > 30:
                bland = True
        else:
            degen_run = 0

        enter_val = xval[j] + s * tmin
        xb_new = xb - s * tmin * w
        lv_col = basis[leave]
        lv_val = xb_new[leave]
        xval[basis] = xb_new
        # leaving variable lands on the bound the ratio test hit
        if abs(lv_val - lower[lv_col]) <= abs(lv_val - upper[lv_col]):
            vstat[lv_col] = 0
            xval[lv_col] = lower[lv_col]
        else:
            vstat[lv_col] = 1
            xval[lv_col] = upper[lv_col]
        basis[leave] = j
        vstat[j] = 2
        xval[j] = enter_val

        # product-form update of binv
        prow = binv[leave] / piv
        wk = w.copy()
        wk[leave] = 0.0
        binv -= np.outer(wk, prow)
        binv[leave] = prow

    return ITER_LIMIT, max_iter, bland


def held_karp_table(dist):
    """All-subset shortest-path table for cycles through vertex 0.

    ``dp[mask, j]`` is the cheapest path from vertex 0 that visits exactly
    the customers in ``mask`` (bit j = vertex j+1) and ends at vertex j+1.
    The cheapest cycle on ``mask`` is ``min_j dp[mask, j] + dist[j+1, 0]``.
    """
    n = dist.shape[0]
    m = n - 1
    if m > HELD_KARP_MAX - 1:
        raise ValueError(f"pure Held-Karp kernel limited to {HELD_KARP_MAX} vertices")
    dp = np.full((1 << m, max(m, 1)), np.inf)
    if m == 0:
        return dp
    dsub = np.ascontiguousarray(dist[1:, 1:])
    for j in range(m):
        dp[1 << j, j] = dist[0, j + 1]
    for mask in range(3, 1 << m):
        if mask & (mask - 1) == 0:
            continue
        row = dp[mask]
        sub = mask
        while sub:
            j = (sub & -sub).bit_length() - 1
            sub &= sub - 1
            prev = dp[mask ^ (1 << j)]
            row[j] = np.min(prev + dsub[:, j])
    return dp


def mst_cost(dist):
    """Prim's algorithm on a dense symmetric cost matrix; inf = no edge."""
    k = dist.shape[0]
    if k <= 1:
        return 0.0
    best = dist[0].astype(float, copy=True)
    best[0] = np.inf
    intree = np.zeros(k, dtype=bool)
    intree[0] = True
    total = 0.0
    for _ in range(k - 1):
        j = int(np.argmin(best))
        if best[j] == np.inf:
            return np.inf  # disconnected
        total += best[j]
        intree[j] = True
        best = np.where(intree, np.inf, np.minimum(best, dist[j]))
    return total
