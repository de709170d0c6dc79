import numpy as np
import pytest

from warpflow.grid import GridError, Stencil, build_chart_grid, pad


def test_periodic_circle_grid():
    g = build_chart_grid((64,))
    assert g.shape == (64,)
    assert g.spacing[0] == pytest.approx(2 * np.pi / 64)
    assert g.coords[0][0] == 0.0
    assert g.coords[0][-1] < 2 * np.pi


def test_sphere_grid_half_offset():
    g = build_chart_grid((32, 64), ("pole", "periodic"))
    theta, lam = g.coords
    np.testing.assert_allclose(theta, (np.arange(32) + 0.5) * np.pi / 32)
    np.testing.assert_allclose(lam, 2 * np.pi * np.arange(64) / 64)


@pytest.mark.parametrize(
    "nodes, topo, msg",
    [
        ((4, 64), ("pole", "periodic"), "node count below minimum"),
        ((64,), ("pole",), "pole-bounded"),
        ((16, 31), ("pole", "periodic"), "even longitude"),
        ((8, 8, 8), None, "dimension"),
    ],
)
def test_grid_rejects(nodes, topo, msg):
    with pytest.raises(GridError, match=msg):
        build_chart_grid(nodes, topo)


def test_pad_across_pole_shifts_longitude():
    g = build_chart_grid((8, 16), ("pole", "periodic"))
    theta, lam = g.mesh()
    f = np.cos(lam) * np.sin(theta)  # smooth: x coordinate
    P = pad(f, g)
    # ghost row above theta_0 is theta_0 itself at longitude + pi
    np.testing.assert_allclose(P[0, 1:-1], np.roll(f[0], 8))
    np.testing.assert_allclose(P[0, 1:-1], -f[0], atol=1e-15)


@pytest.mark.parametrize("n0", [16, 32])
def test_stencil_partials_on_smooth_sphere_field(n0):
    g = build_chart_grid((n0, 2 * n0), ("pole", "periodic"))
    theta, lam = g.mesh()
    z = np.cos(theta) + np.sin(theta) * np.cos(lam)
    st = Stencil(g)
    d = st.gradient(z)
    exact = np.array([-np.sin(theta) + np.cos(theta) * np.cos(lam), -np.sin(theta) * np.sin(lam)])
    assert np.max(np.abs(d - exact)) < 2 * g.h_max**2


def test_stencil_second_order_convergence():
    errs = []
    for N in (32, 64, 128):
        g = build_chart_grid((N,))
        (x,) = g.mesh()
        f = np.exp(np.sin(x))
        h2 = Stencil(g).second_partials(f)[0, 0]
        exact = (np.cos(x) ** 2 - np.sin(x)) * f
        errs.append(np.max(np.abs(h2 - exact)))
    order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(order) > 1.9


def test_upwind_is_first_order():
    errs = []
    for N in (32, 64, 128):
        g = build_chart_grid((N,))
        (x,) = g.mesh()
        d = Stencil(g, "upwind1").gradient(np.sin(x))[0]
        errs.append(np.max(np.abs(d - np.cos(x))))
    assert 0.8 < np.log2(errs[1] / errs[2]) < 1.2


def test_interior_mask_cap():
    g = build_chart_grid((32, 64), ("pole", "periodic"))
    m = g.interior_mask(np.pi / 6)
    theta = g.mesh()[0]
    assert not m[theta < np.pi / 6].any()
    assert m[(theta > np.pi / 6) & (theta < 5 * np.pi / 6)].all()
    assert build_chart_grid((16, 16)).interior_mask(np.pi / 6).all()


def test_digest_depends_on_layout_and_context():
    a = build_chart_grid((16, 32), ("pole", "periodic"))
    b = build_chart_grid((16, 32))
    assert len(a.digest()) == 32
    assert a.digest() != b.digest()
    assert a.digest("round-sphere") != a.digest("perturbed-sphere")
