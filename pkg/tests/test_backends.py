"""The compiled kernels and the pure-Python fallback must agree exactly."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efs import _pykernels
from efs._backend import BACKEND, get_kernels

try:
    ck = get_kernels("cython")
except ImportError:  # extension not built
    ck = None

needs_ext = pytest.mark.skipif(ck is None, reason="compiled extension not built")


def test_backend_name():
    assert BACKEND in ("cython", "python")
    assert get_kernels("python") is _pykernels


def problem(seed, n=25, p=7):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    X[:, -1] = X[:, 0] + X[:, 1]  # a column that goes degenerate
    y = rng.normal(size=n)
    return X.T @ X, X.T @ y


@needs_ext
@given(st.integers(0, 10**6), st.integers(1, 7), st.integers(1, 7), st.booleans())
@settings(max_examples=60, deadline=None)
def test_greedy_path_identical(seed, k, m, repl):
    G, b = problem(seed)
    U = np.random.default_rng(seed).random((k, min(m, 7)))
    a = _pykernels.greedy_path(G, b, k, m, U, 1e-10, repl)
    c = ck.greedy_path(G, b, k, m, U, 1e-10, repl)
    np.testing.assert_array_equal(a[0], c[0])
    np.testing.assert_array_equal(a[3], c[3])
    np.testing.assert_allclose(a[1], c[1], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a[2], c[2], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(
        _pykernels.coef_paths(a[0], a[1], a[2], 7), ck.coef_paths(c[0], c[1], c[2], 7), atol=1e-10
    )


@needs_ext
@given(st.integers(0, 10**6), st.integers(1, 7), st.integers(1, 7))
@settings(max_examples=40, deadline=None)
def test_ensemble_identical(seed, k, m):
    G, b = problem(seed)
    U = np.random.default_rng(seed).random((9, k, min(m, 7)))
    np.testing.assert_allclose(
        _pykernels.ensemble_coef_paths(G, b, k, m, U), ck.ensemble_coef_paths(G, b, k, m, U), atol=1e-10
    )


@needs_ext
@given(st.integers(1, 9), st.data(), st.booleans())
@settings(max_examples=40, deadline=None)
def test_rank_counts_identical(p, data, repl):
    k = data.draw(st.integers(0, p))
    m = data.draw(st.integers(1, p))
    U = np.random.default_rng(p * 100 + k).random((50, min(k, p), min(m, p)))
    np.testing.assert_array_equal(
        _pykernels.rank_mc_counts(k, m, p, U, repl), ck.rank_mc_counts(k, m, p, U, repl)
    )


def test_forced_fallback_runs(monkeypatch):
    import importlib

    import efs._backend as backend

    monkeypatch.setenv("EFS_BACKEND", "python")
    mod = importlib.reload(backend)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("EFS_BACKEND")
        importlib.reload(backend)
