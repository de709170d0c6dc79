"""The ambient warped product N = R+ x_Id M^n with metric dr^2 + r^2 sigma.

Ambient index 0 is the radial direction; index ``k + 1`` is base coordinate
``k``.  Ambient tensors are evaluated lazily at a radial value per base node
(typically r = u(p) along a graph), never on an (r, p) product grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basegeom import MetricField, riemann_base
from .grid import Stencil
from .tensor import norm, sym_inv


class AmbientError(ValueError):
    pass


@dataclass(frozen=True)
class AmbientPoint:
    r: float
    node: tuple[int, ...]

    def __post_init__(self):
        if not self.r > 0:
            raise AmbientError(f"radial value must be positive, got {self.r}")


@dataclass
class AmbientGeometry:
    r: np.ndarray
    gamma: np.ndarray
    gamma_inv: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    H_level: np.ndarray


def _radial(r, metric: MetricField) -> np.ndarray:
    r = np.broadcast_to(np.asarray(r, dtype=float), metric.grid.shape)
    if not np.all(r > 0):
        bad = np.argwhere(~(r > 0))[0]
        raise AmbientError(f"radial value must be positive (node {tuple(int(k) for k in bad)})")
    return r


def ambient_metric(r, metric: MetricField) -> np.ndarray:
    r = _radial(r, metric)
    n = metric.n
    gam = np.zeros((n + 1, n + 1) + metric.grid.shape)
    gam[0, 0] = 1.0
    gam[1:, 1:] = r**2 * metric.sigma
    return gam


def ambient_christoffel(r, metric: MetricField, base_christoffel=None) -> np.ndarray:
    """Gbar[c, a, b] for the warped metric at radius ``r``."""
    r = _radial(r, metric)
    n = metric.n
    G = base_christoffel if base_christoffel is not None else metric.christoffel
    out = np.zeros((n + 1,) * 3 + metric.grid.shape)
    out[1:, 1:, 1:] = G
    out[0, 1:, 1:] = -r * metric.sigma
    for k in range(n):
        out[k + 1, 0, k + 1] = 1.0 / r
        out[k + 1, k + 1, 0] = 1.0 / r
    return out


def ambient_riemann(r, metric: MetricField) -> np.ndarray:
    """Closed form: radial components vanish, R_ijkl = r^2 (R^sigma - sigma^sigma)."""
    r = _radial(r, metric)
    n = metric.n
    s = metric.sigma
    out = np.zeros((n + 1,) * 4 + metric.grid.shape)
    out[1:, 1:, 1:, 1:] = r**2 * (
        metric.riemann
        - np.einsum("ik...,jl...->ijkl...", s, s)
        + np.einsum("il...,jk...->ijkl...", s, s)
    )
    return out


def ambient_ricci(riemann: np.ndarray, gamma_inv: np.ndarray) -> np.ndarray:
    return np.einsum("imkl...,lm...->ik...", riemann, gamma_inv)


def level_set_geometry(r, metric: MetricField):
    """Induced metric, second fundamental form and mean curvature of {r} x M."""
    r = _radial(r, metric)
    alpha = r**2 * metric.sigma
    beta = r * metric.sigma
    H = np.einsum("ij...,ij...->...", sym_inv(alpha), beta)
    return alpha, beta, H


def ambient_geometry(r, metric: MetricField) -> AmbientGeometry:
    r = _radial(r, metric)
    gam = ambient_metric(r, metric)
    alpha, beta, H = level_set_geometry(r, metric)
    return AmbientGeometry(
        r=r,
        gamma=gam,
        gamma_inv=sym_inv(gam),
        christoffel=ambient_christoffel(r, metric),
        riemann=ambient_riemann(r, metric),
        alpha=alpha,
        beta=beta,
        H_level=H,
    )


def _ambient_parity(grid, rank: int) -> np.ndarray:
    """Cross-pole parity of ambient components (ambient index 1 is colatitude)."""
    n = grid.n
    par = np.ones((n + 1,) * rank)
    if not grid.has_pole:
        return par
    for idx in np.ndindex(*par.shape):
        par[idx] = (-1.0) ** sum(1 for k in idx if k == 1)
    return par


def ambient_riemann_stencil(r: float, metric: MetricField, dr: float | None = None,
                            stencil: Stencil | None = None) -> np.ndarray:
    """Curvature of Gbar by finite differences: centered in r, grid stencils on M."""
    stencil = stencil or Stencil(metric.grid)
    dr = dr if dr is not None else metric.grid.h_min
    if not r - dr > 0:
        raise AmbientError("radial step reaches the origin")
    n = metric.n
    G = ambient_christoffel(r, metric)
    dG = np.zeros((n + 1,) * 4 + metric.grid.shape)
    radial = (ambient_christoffel(r + dr, metric) - ambient_christoffel(r - dr, metric)) / (2 * dr)
    dG[:, :, :, 0] = radial
    par = _ambient_parity(metric.grid, 3)
    for ax in range(n):
        dG[:, :, :, ax + 1] = stencil.partial(G, ax, par)
    return riemann_base(G, dG, ambient_metric(r, metric))


def radial_curvature_residual(riemann: np.ndarray, gamma_inv: np.ndarray) -> np.ndarray:
    """Pointwise gamma-norm of the components Rbar_0bcd."""
    n1 = riemann.shape[0]
    mask = np.zeros((n1,) * 4)
    mask[0] = 1.0
    mask = mask.reshape(mask.shape + (1,) * (riemann.ndim - 4))
    return norm(riemann * mask, gamma_inv)


def ricci_relation_check(ric_base: np.ndarray, ric_ambient: np.ndarray, sigma: np.ndarray) -> float:
    """max |Ric_M - Ricbar - (n - 1) sigma| over nodes and tangential components."""
    n = sigma.shape[0]
    tang = ric_ambient[1:, 1:] if ric_ambient.shape[0] == n + 1 else ric_ambient
    return float(np.max(np.abs(ric_base - tang - (n - 1) * sigma)))
