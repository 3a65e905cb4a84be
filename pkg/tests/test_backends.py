import importlib
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from landau_apriori import _core_py, core
from landau_apriori.coefficients import KernelParams, kernel_tables
from landau_apriori.grid import VelocityGrid

compiled = pytest.importorskip("landau_apriori._core", reason="compiled extension not built")


def test_backend_is_selected():
    assert core.BACKEND in ("compiled", "python")


def test_forcing_python_backend():
    code = "from landau_apriori import core; print(core.BACKEND)"
    env = {"LANDAU_APRIORI_BACKEND": "python", "PATH": "/usr/bin:/bin"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_set_threads_validation():
    with pytest.raises(ValueError):
        core.set_threads(0)
    before = core.get_threads()
    core.set_threads(3)
    assert core.get_threads() == 3
    core.set_threads(before)


@pytest.mark.parametrize("d,n", [(1, 15), (2, 9), (3, 5)])
@given(seed=st.integers(0, 2**32 - 1))
def test_convolve_agrees(d, n, seed):
    rng = np.random.default_rng(seed)
    m = (2 * n - 1) ** d
    tables = rng.standard_normal((3, m))
    f = rng.standard_normal(n**d)
    a = compiled.convolve(tables, f, d, n, 1)
    b = _core_py.convolve(tables, f, d, n)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(b).max())


@pytest.mark.parametrize("d,n", [(1, 15), (2, 9), (3, 5)])
@given(seed=st.integers(0, 2**32 - 1))
def test_apply_operator_agrees(d, n, seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(n**d)
    abar = rng.standard_normal((d, d, n**d))
    abar = 0.5 * (abar + abar.transpose(1, 0, 2))
    cbar = rng.standard_normal(n**d)
    a = compiled.apply_operator(f, abar.reshape(d * d, -1), cbar, d, n, 0.3)
    b = _core_py.apply_operator(f, abar.reshape(d * d, -1), cbar, d, n, 0.3)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(b).max())


def test_threads_do_not_change_results_beyond_rounding():
    g = VelocityGrid(2, 4.0, 33)
    tables = np.asarray(kernel_tables(g, KernelParams(-1.0)))
    f = np.random.default_rng(0).random(g.size)
    serial = compiled.convolve(tables, f, 2, g.n, 1)
    parallel = compiled.convolve(tables, f, 2, g.n, 4)
    np.testing.assert_allclose(serial, parallel, rtol=1e-13)
    # the serial path is deterministic bit for bit
    np.testing.assert_array_equal(serial, compiled.convolve(tables, f, 2, g.n, 1))
