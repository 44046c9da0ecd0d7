"""Compiled and pure-Python cores agree on every hot loop."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fredholm2d import _backend, _pycore
from fredholm2d.geometry import named_domain
from fredholm2d.nodes import generate_nodes
from fredholm2d.reconstruction import build_mls

compiled = pytest.mark.skipif(_backend.core is _pycore, reason="compiled core not built")


@compiled
@pytest.mark.parametrize("domain", ["unit_square", "unit_disk", "l_shape", "annulus"])
@pytest.mark.parametrize("seed", [0, 7])
def test_nodes_identical(domain, seed):
    dom = named_domain(domain)
    a = generate_nodes(dom, 0.07, seed=seed, backend=_backend.core)
    b = generate_nodes(dom, 0.07, seed=seed, backend=_pycore)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.boundary_flags, b.boundary_flags)


@compiled
@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_mls_identical(p):
    dom = named_domain("unit_disk")
    X = generate_nodes(dom, 0.15, seed=1)
    Y = generate_nodes(dom, 0.08, seed=2)
    a = build_mls(X, Y, p, 1.5, backend=_backend.core).matrix.toarray()
    b = build_mls(X, Y, p, 1.5, backend=_pycore).matrix.toarray()
    assert np.abs(a - b).max() <= 1e-12


@compiled
@settings(max_examples=10, deadline=None)
@given(h=st.floats(0.06, 0.3), seed=st.integers(0, 2 ** 31))
def test_nodes_identical_random(h, seed):
    dom = named_domain("unit_square")
    a = generate_nodes(dom, h, seed=seed, backend=_backend.core)
    b = generate_nodes(dom, h, seed=seed, backend=_pycore)
    assert np.array_equal(a.points, b.points)


def test_pure_env_switch():
    code = "from fredholm2d import BACKEND; print(BACKEND)"
    env = dict(os.environ, FREDHOLM2D_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
