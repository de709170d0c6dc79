"""Geometry of the graph x(p) = (u(p), p) over the base, with u = exp(phi).

Everything here is algebra on (phi, D phi, D^2 phi) and the base metric.
Stencils enter only through ``covariant_hessian`` and the gradient of phi.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basegeom import MetricField, christoffel_base
from .grid import Stencil
from .tensor import pencil_eigvals, sym_inv


class GraphError(ArithmeticError):
    pass


class ParabolicityError(GraphError):
    pass


@dataclass
class GraphState:
    t: float
    phi: np.ndarray
    step: int = 0
    rescaled: bool = False

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if not np.all(np.isfinite(self.phi)):
            raise GraphError("phi must be finite (u > 0) at every node")

    @property
    def u(self) -> np.ndarray:
        return np.exp(self.phi)


@dataclass
class GraphGeometry:
    phi: np.ndarray
    dphi: np.ndarray
    hess: np.ndarray
    u: np.ndarray
    v: np.ndarray
    grad_sq: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    nu: np.ndarray
    nu_flat: np.ndarray
    tangents: np.ndarray
    h: np.ndarray
    weingarten: np.ndarray
    H: np.ndarray
    H_forms: dict = field(repr=False)
    chi: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    mu: float = 0.0

    @property
    def n(self) -> int:
        return self.dphi.shape[0]

    @property
    def H_discrepancy(self) -> float:
        forms = list(self.H_forms.values())
        return max(float(np.max(np.abs(x - y))) for x in forms for y in forms)

    @property
    def dphi_up(self) -> np.ndarray:
        return self.u**2 * np.einsum("ij...,j...->i...", self.g_inv, self.dphi) * self.v**2

    @property
    def second_fundamental_norm_sq(self) -> np.ndarray:
        """|A|^2_g = h^i_j h^j_i."""
        return np.einsum("ij...,ji...->...", self.weingarten, self.weingarten)


def covariant_hessian(phi, metric: MetricField, stencil: Stencil) -> np.ndarray:
    """D_ij phi = d_ij phi - G^m_ij phi_m."""
    d2 = stencil.second_partials(phi)
    d1 = stencil.gradient(phi)
    return d2 - np.einsum("mij...,m...->ij...", metric.christoffel, d1)


def _check_finite(name, arr, n_lead):
    arr = np.asarray(arr)
    if n_lead:
        bad = ~np.all(np.isfinite(arr), axis=tuple(range(n_lead)))
    else:
        bad = ~np.isfinite(arr)
    if np.any(bad):
        node = tuple(int(k) for k in np.argwhere(bad)[0])
        raise GraphError(f"non-finite {name} at node {node}")


def weingarten_closed_form(u, v, dphi_up, hess, sigma_inv):
    """h^i_j = (uv)^-1 (delta^i_j + (-sigma^ik + phi^i phi^k / v^2) D_kj phi)."""
    n = hess.shape[0]
    P = -sigma_inv + np.einsum("i...,k...->ik...", dphi_up, dphi_up) / v**2
    out = np.einsum("ik...,kj...->ij...", P, hess)
    for i in range(n):
        out[i, i] += 1.0
    return out / (u * v)


def graph_quantities(phi, dphi, hess, metric: MetricField, check_parabolic: bool = True) -> GraphGeometry:
    phi = np.asarray(phi, dtype=float)
    n = metric.n
    s, si = metric.sigma, metric.sigma_inv
    u = np.exp(phi)
    _check_finite("u", u, 0)
    up = np.einsum("ij...,j...->i...", si, dphi)
    grad_sq = np.einsum("i...,i...->...", up, dphi)
    v = np.sqrt(1.0 + grad_sq)
    _check_finite("v", v, 0)
    dd = np.einsum("i...,j...->ij...", dphi, dphi)
    uu = np.einsum("i...,j...->ij...", up, up)
    g = u**2 * (s + dd)
    g_inv = (si - uu / v**2) / u**2
    _check_finite("g", g, 2)

    nu = np.concatenate([(1.0 / v)[None], -up / (u * v)])
    nu_flat = np.concatenate([(1.0 / v)[None], -u * dphi / v])
    tangents = np.zeros((n, n + 1) + phi.shape)
    tangents[:, 0] = u * dphi
    for i in range(n):
        tangents[i, i + 1] = 1.0

    h = (u / v) * (s + dd - hess)
    _check_finite("h", h, 2)
    weing = np.einsum("ik...,kj...->ij...", g_inv, h)

    lap = np.einsum("ij...,ij...->...", si, hess)
    hqq = np.einsum("ij...,ij...->...", uu, hess)
    H_sigma = (n - lap + hqq / v**2) / (u * v)
    H_trace = np.einsum("ii...->...", weing)
    H_metric = (n - u**2 * np.einsum("ij...,ij...->...", sym_inv(g), hess)) / (u * v)
    _check_finite("H", H_sigma, 0)

    F = (n - lap + hqq / v**2) / v**2
    _check_finite("F", F, 0)
    a = (si - uu / v**2) / v**2
    lo, _ = pencil_eigvals(a, si)
    mu = float(np.min(lo))
    geo = GraphGeometry(
        phi=phi,
        dphi=dphi,
        hess=hess,
        u=u,
        v=v,
        grad_sq=grad_sq,
        g=g,
        g_inv=g_inv,
        nu=nu,
        nu_flat=nu_flat,
        tangents=tangents,
        h=h,
        weingarten=weing,
        H=H_sigma,
        H_forms={"sigma": H_sigma, "weingarten": H_trace, "metric": H_metric},
        chi=v / u,
        F=F,
        a=a,
        mu=mu,
    )
    if check_parabolic:
        parabolicity(geo)
    return geo


def graph_geometry(phi, metric: MetricField, stencil: Stencil | None = None, **kw) -> GraphGeometry:
    """Stencil derivatives of phi followed by ``graph_quantities``."""
    stencil = stencil or Stencil(metric.grid)
    dphi = stencil.gradient(phi)
    hess = covariant_hessian(phi, metric, stencil)
    return graph_quantities(phi, dphi, hess, metric, **kw)


def parabolicity(geo: GraphGeometry):
    """a^ij = v^-2 u^2 g^ij and its smallest eigenvalue relative to sigma^ij."""
    if not geo.mu > 0:
        raise ParabolicityError(f"loss of parabolicity: mu = {geo.mu:.3e}")
    return geo.a, geo.mu


def connection_difference(geo: GraphGeometry, metric: MetricField) -> np.ndarray:
    """C^k_ij with gGamma = sigmaGamma + C."""
    n = geo.n
    up = np.einsum("ij...,j...->i...", metric.sigma_inv, geo.dphi)
    eye = np.eye(n).reshape((n, n) + (1,) * geo.phi.ndim)
    C = np.einsum("i...,kj...->kij...", geo.dphi, eye * np.ones_like(geo.phi))
    C = C + np.einsum("kij...->kji...", C)
    C -= np.einsum("k...,ij...->kij...", up, geo.g) / (geo.u * geo.v) ** 2
    C += np.einsum("k...,ij...->kij...", up, geo.hess) / geo.v**2
    return C


def graph_connection(geo: GraphGeometry, metric: MetricField) -> np.ndarray:
    return metric.christoffel + connection_difference(geo, metric)


def graph_connection_stencil(geo: GraphGeometry, stencil: Stencil) -> np.ndarray:
    """Christoffel symbols of the discrete induced metric, by stencils on g."""
    dg = stencil.tensor_gradient(geo.g, 2)
    return christoffel_base(geo.g_inv, dg)


def ambient_ricci_normal(geo: GraphGeometry, metric: MetricField) -> np.ndarray:
    """Ricbar(nu, nu) = (uv)^-2 (Ric_M(Dphi, Dphi) - (n - 1)|Dphi|^2)."""
    n = geo.n
    ric = np.einsum("ij...,i...,j...->...", metric.ricci, geo.dphi_up, geo.dphi_up)
    return (ric - (n - 1) * geo.grad_sq) / (geo.u * geo.v) ** 2
