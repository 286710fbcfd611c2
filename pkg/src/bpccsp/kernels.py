"""Kernel selection: compiled extension if available, numpy fallback otherwise.

Set ``BPCCSP_PURE=1`` to force the fallback (used by the benchmark and the
parity tests).
"""

from __future__ import annotations

import os

from bpccsp import _kernel_py

if os.environ.get("BPCCSP_PURE"):
    _impl = _kernel_py
else:
    try:
        from bpccsp import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernel_py

COMPILED = _impl.COMPILED

ITER_LIMIT = _kernel_py.ITER_LIMIT
DONE = _kernel_py.DONE
UNBOUNDED = _kernel_py.UNBOUNDED
INFEASIBLE = _kernel_py.INFEASIBLE
STALLED = _kernel_py.STALLED

simplex_iterate = _impl.simplex_iterate
held_karp_table = _impl.held_karp_table
mst_cost = _impl.mst_cost
HELD_KARP_MAX = _impl.HELD_KARP_MAX
