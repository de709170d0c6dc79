import os
import subprocess
import sys

import numpy as np
import pytest

from warpflow import _fallback, kernels
from warpflow.graph import graph_geometry
from warpflow.identities import random_graph

from conftest import make_metric

try:
    from warpflow import _kernels as compiled
except ImportError:  # pragma: no cover - extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")

PRESETS = [
    ("round-sphere", (16, 32), None),
    ("perturbed-sphere", (16, 32), {"epsilon": 0.1, "mode": 2}),
    ("flat-torus", (16, 24), None),
    ("circle", (64,), None),
]


def _phi2d(metric, seed=4):
    lay = kernels.layout(metric)
    phi = random_graph(metric.grid, metric.preset, seed)
    return np.ascontiguousarray(phi.reshape(lay.shape2d)), lay


@pytest.mark.parametrize("preset, nodes, params", PRESETS)
def test_rhs_matches_graph_geometry(preset, nodes, params):
    m = make_metric(preset, nodes, params)
    phi, lay = _phi2d(m)
    out, lam, status, _ = kernels.rhs(phi, lay)
    assert status == 0 and lam > 0
    geo = graph_geometry(phi.reshape(m.grid.shape), m)
    np.testing.assert_allclose(out.reshape(m.grid.shape), geo.v / (geo.H * geo.u), rtol=1e-12)


@pytest.mark.parametrize("preset, nodes, expected", [("round-sphere", (16, 32), 0.5), ("circle", (64,), 1.0)])
def test_rhs_of_level_set(preset, nodes, expected):
    m = make_metric(preset, nodes)
    lay = kernels.layout(m)
    out, _, status, _ = kernels.rhs(np.zeros(lay.shape2d), lay)
    assert status == 0
    np.testing.assert_allclose(out, expected, rtol=1e-15)


@needs_ext
@pytest.mark.parametrize("preset, nodes, params", PRESETS)
@pytest.mark.parametrize("upwind", [False, True])
def test_backend_parity_rhs(preset, nodes, params, upwind):
    m = make_metric(preset, nodes, params)
    phi, lay = _phi2d(m)
    a = compiled.rhs(phi, *lay.args, upwind)
    b = _fallback.rhs(phi, *lay.args, upwind)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-13)
    assert a[1] == pytest.approx(b[1], rel=1e-13)
    assert a[2:] == b[2:]


@needs_ext
@pytest.mark.parametrize("method", [2, 4])
def test_backend_parity_integrate(method):
    m = make_metric("round-sphere", (16, 32))
    phi, lay = _phi2d(m)
    pa, pb = phi.copy(), phi.copy()
    ra = compiled.integrate(pa, 0.0, 0.05, *lay.args, 0.5, method, 0.0, 10**6, False)
    rb = _fallback.integrate(pb, 0.0, 0.05, *lay.args, 0.5, method, 0.0, 10**6, False)
    assert ra[:4] == rb[:4]
    np.testing.assert_allclose(pa, pb, rtol=0, atol=1e-15)


def test_integrate_lands_on_target_and_counts_steps():
    m = make_metric("round-sphere", (16, 32))
    lay = kernels.layout(m)
    phi = np.zeros(lay.shape2d)
    t, steps, status, _, _ = kernels.integrate(phi, 0.0, 0.1, lay, c_cfl=0.5, dt_fixed=0.03)
    assert (t, steps, status) == (0.1, 4, 0)
    np.testing.assert_allclose(phi, 0.05, rtol=1e-14)


def test_step_budget_status():
    m = make_metric("round-sphere", (16, 32))
    lay = kernels.layout(m)
    phi = np.zeros(lay.shape2d)
    t, steps, status, _, _ = kernels.integrate(phi, 0.0, 1.0, lay, c_cfl=0.5, max_steps=3)
    assert status == 4 and steps == 3 and t < 1.0


def test_sign_loss_status_names_node():
    m = make_metric("round-sphere", (16, 32))
    lay = kernels.layout(m)
    phi = np.zeros(lay.shape2d)
    phi[5, 7] = 3.0  # sharp spike: concave at the tip
    _, _, status, bad = kernels.rhs(phi, lay)
    assert status == 1
    F = graph_geometry(phi, m, check_parabolic=False).F
    assert bad == np.flatnonzero(F <= 0)[0]
    assert abs(np.unravel_index(bad, lay.shape2d)[0] - 5) <= 1


def test_rejects_non_contiguous():
    m = make_metric("round-sphere", (16, 32))
    lay = kernels.layout(m)
    with pytest.raises(ValueError):
        kernels.integrate(np.zeros((32, 16)).T, 0.0, 1.0, lay, c_cfl=0.5)


def test_pure_env_selects_numpy():
    env = dict(os.environ, WARPFLOW_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from warpflow import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@needs_ext
def test_default_backend_is_compiled():
    assert kernels.BACKEND == "cython" or os.environ.get("WARPFLOW_PURE")
