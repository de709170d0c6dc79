"""The base manifold (M^n, sigma): metric presets and their curvature.

Presets carry closed-form Christoffel symbols and curvature.  The stencil
pipeline (``christoffel_base`` -> ``riemann_base`` -> ``ricci_base``) rebuilds
the same tensors from grid samples of sigma alone and is used to cross-check
them.

Curvature convention: ``R[a, b, c, d]`` is R_abcd obtained by lowering the
last index of

    R_abc^d = d_b G^d_ac - d_a G^d_bc + G^d_be G^e_ac - G^d_ae G^e_bc,

so a round unit sphere has R_0101 = sin^2(theta) and Ric = sigma.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from .grid import ChartGrid, Stencil
from .tensor import pencil_eigvals, sym_det, sym_inv

PRESETS = ("circle", "round-sphere", "perturbed-sphere", "flat-torus")
# presets whose ambient cone is flat Euclidean space minus the origin
FLAT_AMBIENT = ("circle", "round-sphere")


class MetricError(ValueError):
    pass


@dataclass
class MetricField:
    grid: ChartGrid
    preset: str
    params: dict
    sigma: np.ndarray
    sigma_inv: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    delta_ric: float
    sqrt_det: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def ricci_positive(self) -> bool:
        return self.delta_ric > 0

    @property
    def flat_ambient(self) -> bool:
        return self.preset in FLAT_AMBIENT

    @property
    def area(self) -> float:
        """|M^n| by the same quadrature used for graph areas."""
        return float(np.sum(self.sqrt_det) * self.grid.cell_volume)

    @property
    def exact_area(self) -> float:
        """Closed-form |M^n|; Legendre perturbations have zero mean, so the
        perturbed sphere keeps the round value."""
        if self.preset == "circle":
            return 2 * np.pi
        if self.preset == "flat-torus":
            return 4 * np.pi**2
        return 4 * np.pi * float(self.params.get("radius", 1.0)) ** 2

    def label(self) -> str:
        if not self.params:
            return self.preset
        args = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.preset}({args})"


def _constant_curvature_riemann(K, sigma):
    return K * (
        np.einsum("ik...,jl...->ijkl...", sigma, sigma)
        - np.einsum("il...,jk...->ijkl...", sigma, sigma)
    )


def _sphere_tensors(grid: ChartGrid, radius: float, eps: float = 0.0, mode: int = 2):
    """sigma = f(theta) * radius^2 * (dtheta^2 + sin^2 dlam^2), f = 1 + eps P_mode(cos)."""
    theta, _ = grid.mesh()
    s, c = np.sin(theta), np.cos(theta)
    coef = np.zeros(mode + 1)
    coef[mode] = 1.0
    P = legendre.legval(c, coef)
    dP = legendre.legval(c, legendre.legder(coef))
    ddP = legendre.legval(c, legendre.legder(coef, 2))
    Y = P
    Y1 = -s * dP
    Y2 = s**2 * ddP - c * dP
    f = 1.0 + eps * Y
    bad = np.argwhere(f <= 0)
    if bad.size:
        raise MetricError(
            f"perturbed metric not positive definite at node {tuple(int(k) for k in bad[0])}"
        )
    psi1 = eps * Y1 / (2 * f)
    psi2 = eps * Y2 / (2 * f) - (eps * Y1) ** 2 / (2 * f**2)

    shape = grid.shape
    sigma = np.zeros((2, 2) + shape)
    sigma[0, 0] = radius**2 * f
    sigma[1, 1] = radius**2 * f * s**2
    # round-sphere symbols plus the conformal correction d_i psi + d_j psi - sigma0_ij grad psi
    G = np.zeros((2, 2, 2) + shape)
    G[0, 1, 1] = -s * c - s**2 * psi1
    G[1, 0, 1] = G[1, 1, 0] = c / s + psi1
    G[0, 0, 0] = psi1
    lap0 = psi2 + (c / s) * psi1
    K = (1.0 - lap0) / (radius**2 * f)
    return sigma, G, K


def eval_metric(preset: str, params: dict | None, grid: ChartGrid) -> MetricField:
    """Sample a metric preset and its curvature on ``grid``."""
    params = dict(params or {})
    if preset not in PRESETS:
        raise MetricError(f"unknown metric preset {preset!r}")
    shape = grid.shape
    n = grid.n
    if preset == "circle":
        if n != 1:
            raise MetricError("circle preset needs a one-dimensional periodic grid")
        sigma = np.ones((1, 1) + shape)
        G = np.zeros((1, 1, 1) + shape)
        R = np.zeros((1,) * 4 + shape)
    elif preset == "flat-torus":
        if grid.topology != ("periodic", "periodic"):
            raise MetricError("flat-torus preset needs a periodic x periodic grid")
        sigma = np.zeros((2, 2) + shape)
        sigma[0, 0] = sigma[1, 1] = 1.0
        G = np.zeros((2, 2, 2) + shape)
        R = np.zeros((2,) * 4 + shape)
    else:
        if grid.topology != ("pole", "periodic"):
            raise MetricError(f"{preset} preset needs a (pole, periodic) grid")
        radius = float(params.get("radius", 1.0))
        if radius <= 0:
            raise MetricError("sphere radius must be positive")
        if preset == "round-sphere":
            sigma, G, K = _sphere_tensors(grid, radius)
        else:
            eps = float(params.get("epsilon", 0.05))
            mode = int(params.get("mode", 2))
            if mode < 1:
                raise MetricError("perturbation mode must be >= 1")
            sigma, G, K = _sphere_tensors(grid, radius, eps, mode)
        R = _constant_curvature_riemann(K, sigma)

    det = sym_det(sigma)
    bad = np.argwhere(~(det > 0) | ~(sigma[0, 0] > 0))
    if bad.size:
        raise MetricError(f"metric not positive definite at node {tuple(int(k) for k in bad[0])}")
    sigma_inv = sym_inv(sigma)
    ric, delta = ricci_base(R, sigma_inv, sigma)
    return MetricField(
        grid=grid,
        preset=preset,
        params=params,
        sigma=sigma,
        sigma_inv=sigma_inv,
        christoffel=G,
        riemann=R,
        ricci=ric,
        delta_ric=delta,
        sqrt_det=np.sqrt(det),
    )


def christoffel_base(sigma_inv: np.ndarray, dsigma: np.ndarray) -> np.ndarray:
    """G^k_ij = 1/2 sigma^kl (d_i sigma_lj + d_j sigma_il - d_l sigma_ij).

    ``dsigma[i, j, k]`` is d_k sigma_ij.
    """
    if not np.all(np.isfinite(sigma_inv)):
        raise MetricError("singular metric: inverse is not finite")
    first = np.einsum("lji...->lij...", dsigma)  # d_i sigma_lj
    second = np.einsum("ilj...->lij...", dsigma)  # d_j sigma_il
    third = np.einsum("ijl...->lij...", dsigma)  # d_l sigma_ij
    return 0.5 * np.einsum("kl...,lij...->kij...", sigma_inv, first + second - third)


def riemann_base(G: np.ndarray, dG: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Lowered curvature from Christoffel symbols and their partials.

    ``dG[d, a, c, b]`` is d_b G^d_ac.
    """
    up = (
        np.einsum("dacb...->abcd...", dG)
        - np.einsum("dbca...->abcd...", dG)
        + np.einsum("dbe...,eac...->abcd...", G, G)
        - np.einsum("dae...,ebc...->abcd...", G, G)
    )
    return np.einsum("abcd...,dl...->abcl...", up, sigma)


def ricci_base(R: np.ndarray, sigma_inv: np.ndarray, sigma: np.ndarray):
    """Ric_ik = R_imk^m and the Ricci lower bound relative to sigma."""
    ric = np.einsum("imkl...,lm...->ik...", R, sigma_inv)
    lo, _ = pencil_eigvals(ric, sigma)
    return ric, float(np.min(lo))


def stencil_metric_field(metric: MetricField, stencil: Stencil | None = None) -> dict:
    """Christoffel, Riemann and Ricci rebuilt from grid samples of sigma."""
    stencil = stencil or Stencil(metric.grid)
    dsigma = stencil.tensor_gradient(metric.sigma, 2)
    G = christoffel_base(metric.sigma_inv, dsigma)
    dG = stencil.tensor_gradient(G, 3)
    R = riemann_base(G, dG, metric.sigma)
    ric, delta = ricci_base(R, metric.sigma_inv, metric.sigma)
    return {"dsigma": dsigma, "christoffel": G, "riemann": R, "ricci": ric, "delta_ric": delta}


def metric_compatibility(metric: MetricField, stencil: Stencil | None = None) -> np.ndarray:
    """Pointwise sigma-norm of D_k sigma_ij with stencil partials and preset symbols."""
    from .tensor import covariant_derivative, norm

    stencil = stencil or Stencil(metric.grid)
    D = covariant_derivative(metric.sigma, (False, False), metric.christoffel, stencil)
    return norm(D, metric.sigma_inv)
