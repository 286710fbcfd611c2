"""Parity between the compiled kernels and the numpy fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from bpccsp import _kernel_py, kernels


def _sym(rng, n):
    d = rng.uniform(1.0, 50.0, size=(n, n))
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return d


compiled = pytest.mark.skipif(not kernels.COMPILED,
                              reason="extension module not built")


@compiled
def test_held_karp_parity():
    from bpccsp import _kernel
    rng = np.random.default_rng(5)
    for n in range(3, 11):
        d = _sym(rng, n)
        a = _kernel.held_karp_table(d)
        b = _kernel_py.held_karp_table(d)
        mask = np.isfinite(a)
        assert np.array_equal(mask, np.isfinite(b))
        assert np.allclose(a[mask], b[mask], atol=1e-9)


@compiled
def test_mst_parity():
    from bpccsp import _kernel
    rng = np.random.default_rng(6)
    for n in (2, 5, 17, 60):
        d = _sym(rng, n)
        assert _kernel.mst_cost(d) == pytest.approx(_kernel_py.mst_cost(d),
                                                    abs=1e-9)


def test_pure_env_forces_fallback():
    code = ("import bpccsp.kernels as k; "
            "print(k.COMPILED)")
    env = dict(os.environ, BPCCSP_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_held_karp_guard():
    d = np.zeros((_kernel_py.HELD_KARP_MAX + 1,
                  _kernel_py.HELD_KARP_MAX + 1))
    with pytest.raises(ValueError):
        _kernel_py.held_karp_table(d)


def test_mst_known_value():
    # path graph 0-1-2-3 embedded in a complete metric
    d = np.array([[0.0, 1.0, 2.0, 3.0],
                  [1.0, 0.0, 1.0, 2.0],
                  [2.0, 1.0, 0.0, 1.0],
                  [3.0, 2.0, 1.0, 0.0]])
    assert kernels.mst_cost(d) == pytest.approx(3.0)


def test_held_karp_triangle():
    d = np.array([[0.0, 3.0, 4.0],
                  [3.0, 0.0, 5.0],
                  [4.0, 5.0, 0.0]])
    dp = kernels.held_karp_table(d)
    # full mask over customers {1,2}: best path 0->1->2 = 3+5, 0->2->1 = 4+5
    full = 0b11
    assert dp[full, 1] == pytest.approx(8.0)   # ends at vertex 2
    assert dp[full, 0] == pytest.approx(9.0)   # ends at vertex 1
