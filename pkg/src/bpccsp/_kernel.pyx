# cython: language_level=3, boundscheck=False, wraparound=False
# cython: cdivision=True, initializedcheck=False
"""Compiled numeric kernels.

Same contract as :mod:`bpccsp._kernel_py`; see that module for the pivot
rule documentation.  The selector in :mod:`bpccsp.kernels` prefers this
module when the extension built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

COMPILED = True

ITER_LIMIT = 0
DONE = 1
UNBOUNDED = 2
INFEASIBLE = 3
STALLED = 4

HELD_KARP_MAX = 20

def simplex_iterate(double[:, ::1] at, double[::1] lower, double[::1] upper,
                    double[::1] cost, cnp.int64_t[::1] basis,
                    cnp.int8_t[::1] vstat, double[::1] xval,
                    double[:, ::1] binv, int phase, bint bland,
                    int max_iter, double tol):
    """Run bounded-variable primal simplex pivots in place.

    Mirrors ``_kernel_py.simplex_iterate``; returns ``(status, iterations,
    bland)``.
    """
    cdef Py_ssize_t ncols = at.shape[0]
    cdef Py_ssize_t m = at.shape[1]
    cdef double dtol = tol if tol > 1e-9 else 1e-9
    cdef int degen_run = 0
    cdef int it
    cdef Py_ssize_t l, r, j, leave, col, lv_col
    cdef double acc, dj, best_abs, s, rate, xb_l, lo_b, up_b
    cdef double hi_t, lo_t, tk_l, tmin, tmax, piv, f
    cdef double enter_val, lv_val
    cdef bint any_viol, up_ok, dn_ok, rising, falling
    cdef cnp.int64_t best_basis

    cdef double[::1] y = np.empty(m)
    cdef double[::1] w = np.empty(m)
    cdef double[::1] g = np.empty(m)
    cdef double[::1] prow = np.empty(m)
    cdef signed char[::1] below = np.zeros(m, dtype=np.int8)
    cdef signed char[::1] above = np.zeros(m, dtype=np.int8)

    for it in range(max_iter):
        # objective gradient on the basis (phase 1: bound violations)
        if phase == 1:
            any_viol = False
            for l in range(m):
                col = basis[l]
                xb_l = xval[col]
                if xb_l < lower[col] - tol:
                    g[l] = -1.0
                    below[l] = 1
                    above[l] = 0
                    any_viol = True
                elif xb_l > upper[col] + tol:
                    g[l] = 1.0
                    below[l] = 0
                    above[l] = 1
                    any_viol = True
                else:
                    g[l] = 0.0
                    below[l] = 0
                    above[l] = 0
            if not any_viol:
                return DONE, it, bland
            for r in range(m):
                acc = 0.0
                for l in range(m):
                    acc += binv[l, r] * g[l]
                y[r] = acc
        else:
            for r in range(m):
                acc = 0.0
                for l in range(m):
                    acc += binv[l, r] * cost[basis[l]]
                y[r] = acc

        # entering column: Dantzig on |reduced cost|, or Bland when set
        j = -1
        best_abs = 0.0
        for col in range(ncols):
            if vstat[col] == 2:
                continue
            acc = 0.0
            for r in range(m):
                acc += at[col, r] * y[r]
            dj = acc if phase == 1 else cost[col] - acc
            up_ok = vstat[col] == 0 and dj > dtol
            dn_ok = vstat[col] == 1 and dj < -dtol
            if not (up_ok or dn_ok):
                continue
            if bland:
                j = col
                break
            if fabs(dj) > best_abs:
                best_abs = fabs(dj)
                j = col
        if j < 0:
            return (DONE if phase == 2 else INFEASIBLE), it, bland
        s = 1.0 if vstat[j] == 0 else -1.0

        for l in range(m):
            acc = 0.0
            for r in range(m):
                acc += binv[l, r] * at[j, r]
            w[l] = acc

        # ratio test: distance each basic variable allows
        tmin = INFINITY
        for l in range(m):
            rate = -s * w[l]
            rising = rate > dtol
            falling = rate < -dtol
            if not (rising or falling):
                continue
            col = basis[l]
            lo_b = lower[col]
            up_b = upper[col]
            if phase == 1:
                # infeasible-below basics block only when rising (at their
                # lower bound); infeasible-above only when falling
                hi_t = INFINITY if above[l] else up_b
                lo_t = -INFINITY if below[l] else lo_b
                if below[l] and rising:
                    hi_t = lo_b
                if above[l] and falling:
                    lo_t = up_b
            else:
                hi_t = up_b
                lo_t = lo_b
            if rising and hi_t < INFINITY:
                tk_l = (hi_t - xval[col]) / rate
            elif falling and lo_t > -INFINITY:
                tk_l = (lo_t - xval[col]) / rate
            else:
                continue
            if tk_l < 0.0:
                tk_l = 0.0
            if tk_l < tmin:
                tmin = tk_l

        tmax = upper[j] - lower[j]  # bound-flip distance (may be inf)
        if tmax <= tmin:
            if tmax == INFINITY:
                return UNBOUNDED, it, bland
            # bound flip, no basis change
            for l in range(m):
                xval[basis[l]] = xval[basis[l]] - s * tmax * w[l]
            xval[j] = upper[j] if s > 0 else lower[j]
            vstat[j] = 1 - vstat[j]
            degen_run = 0
            continue

        # leaving row: smallest ratio, ties by smallest column index
        leave = -1
        best_basis = 0
        for l in range(m):
            rate = -s * w[l]
            rising = rate > dtol
            falling = rate < -dtol
            if not (rising or falling):
                continue
            col = basis[l]
            lo_b = lower[col]
            up_b = upper[col]
            if phase == 1:
                hi_t = INFINITY if above[l] else up_b
                lo_t = -INFINITY if below[l] else lo_b
                if below[l] and rising:
                    hi_t = lo_b
                if above[l] and falling:
                    lo_t = up_b
            else:
                hi_t = up_b
                lo_t = lo_b
            if rising and hi_t < INFINITY:
                tk_l = (hi_t - xval[col]) / rate
            elif falling and lo_t > -INFINITY:
                tk_l = (lo_t - xval[col]) / rate
            else:
                continue
            if tk_l < 0.0:
                tk_l = 0.0
            if tk_l <= tmin + 1e-12:
                if leave < 0 or basis[l] < best_basis:
                    leave = l
                    best_basis = basis[l]

        piv = w[leave]
        if fabs(piv) < 1e-9:
            return STALLED, it, bland

        if tmin <= 1e-12:
            degen_run += 1
            if degen_run > 30:
                bland = True
        else:
            degen_run = 0

        enter_val = xval[j] + s * tmin
        for l in range(m):
            xval[basis[l]] = xval[basis[l]] - s * tmin * w[l]
        lv_col = basis[leave]
        lv_val = xval[lv_col]
        # leaving variable lands on the bound the ratio test hit
        if fabs(lv_val - lower[lv_col]) <= fabs(lv_val - upper[lv_col]):
            vstat[lv_col] = 0
            xval[lv_col] = lower[lv_col]
        else:
            vstat[lv_col] = 1
            xval[lv_col] = upper[lv_col]
        basis[leave] = j
        vstat[j] = 2
        xval[j] = enter_val

        # product-form update of binv
        for r in range(m):
            prow[r] = binv[leave, r] / piv
        for l in range(m):
            if l == leave:
                continue
            f = w[l]
            if f == 0.0:
                continue
            for r in range(m):
                binv[l, r] -= f * prow[r]
        for r in range(m):
            binv[leave, r] = prow[r]

    return ITER_LIMIT, max_iter, bland


cdef inline int _ctz(unsigned long long x) nogil:
    cdef int c = 0
    while not (x & 1):
        x >>= 1
        c += 1
    return c


def held_karp_table(double[:, ::1] dist):
    """All-subset shortest-path table for cycles through vertex 0.

    Same layout as the pure kernel: ``dp[mask, j]`` is the cheapest path
    from vertex 0 visiting exactly ``mask`` (bit j = vertex j+1) and
    ending at vertex j+1.
    """
    cdef Py_ssize_t n = dist.shape[0]
    cdef Py_ssize_t m = n - 1
    if m > HELD_KARP_MAX - 1:
        raise ValueError(f"compiled Held-Karp kernel limited to {HELD_KARP_MAX} vertices")
    dp_arr = np.full((1 << m, max(m, 1)), np.inf)
    if m == 0:
        return dp_arr
    cdef double[:, ::1] dp = dp_arr
    cdef unsigned long long mask, sub, s2, prevmask
    cdef Py_ssize_t j, k
    cdef double best, v
    for j in range(m):
        dp[1ULL << j, j] = dist[0, j + 1]
    with nogil:
        for mask in range(3, 1ULL << m):
            if mask & (mask - 1) == 0:
                continue
            sub = mask
            while sub:
                j = _ctz(sub)
                sub &= sub - 1
                prevmask = mask ^ (1ULL << j)
                best = INFINITY
                s2 = prevmask
                while s2:
                    k = _ctz(s2)
                    s2 &= s2 - 1
                    v = dp[prevmask, k] + dist[k + 1, j + 1]
                    if v < best:
                        best = v
                dp[mask, j] = best
    return dp_arr


def mst_cost(double[:, ::1] dist):
    """Prim's algorithm on a dense symmetric cost matrix; inf = no edge."""
    cdef Py_ssize_t k = dist.shape[0]
    if k <= 1:
        return 0.0
    cdef double[::1] best = np.empty(k)
    cdef signed char[::1] intree = np.zeros(k, dtype=np.int8)
    cdef Py_ssize_t i, j, step
    cdef double total = 0.0, b
    for i in range(k):
        best[i] = dist[0, i]
    best[0] = INFINITY
    intree[0] = 1
    for step in range(k - 1):
        j = 0
        b = INFINITY
        for i in range(k):
            if not intree[i] and best[i] < b:
                b = best[i]
                j = i
        if b == INFINITY:
            return np.inf  # disconnected
        total += b
        intree[j] = 1
        for i in range(k):
            if not intree[i] and dist[j, i] < best[i]:
                best[i] = dist[j, i]
    return total
