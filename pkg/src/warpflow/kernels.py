"""Backend selection for the flow kernels.

The compiled extension is used when it imports; ``WARPFLOW_PURE=1`` forces
the numpy fallback.  ``layout`` packs a metric into the flat arrays both
backends expect.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _fallback

BACKEND = "numpy"
_impl = _fallback
if not os.environ.get("WARPFLOW_PURE"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

METHODS = {"rk2": 2, "rk4": 4}


@dataclass(frozen=True)
class KernelLayout:
    sinv: np.ndarray
    gam: np.ndarray
    h0: float
    h1: float
    pole: bool
    n: int
    sc0: float
    sc1: float
    shape2d: tuple[int, int]

    @property
    def args(self):
        return (self.sinv, self.gam, self.h0, self.h1, self.pole, self.n, self.sc0, self.sc1)


def layout(metric) -> KernelLayout:
    """Flatten sigma^-1 and the base symbols into (3|6, N0, N1) arrays."""
    grid = metric.grid
    n = grid.n
    shape2d = grid.shape if n == 2 else (grid.shape[0], 1)
    sinv = np.zeros((3,) + shape2d)
    gam = np.zeros((6,) + shape2d)
    pairs = [(0, 0), (0, 1), (1, 1)]
    for q, (i, j) in enumerate(pairs):
        if i < n and j < n:
            sinv[q] = metric.sigma_inv[i, j].reshape(shape2d)
            for m in range(n):
                gam[3 * m + q] = metric.christoffel[m, i, j].reshape(shape2d)
    h0 = grid.spacing[0]
    h1 = grid.spacing[1] if n == 2 else h0
    hmin = grid.h_min
    return KernelLayout(
        sinv=np.ascontiguousarray(sinv),
        gam=np.ascontiguousarray(gam),
        h0=h0,
        h1=h1,
        pole=grid.has_pole,
        n=n,
        sc0=hmin / h0,
        sc1=hmin / h1,
        shape2d=shape2d,
    )


def rhs(phi2d: np.ndarray, lay: KernelLayout, upwind: bool = False):
    """(phi_t, Lambda_max, status, bad_flat_index) on a 2D view of phi."""
    return _impl.rhs(np.ascontiguousarray(phi2d, dtype=float), *lay.args, upwind)


def integrate(phi2d: np.ndarray, t: float, t_target: float, lay: KernelLayout, *,
              c_cfl: float, method: str = "rk4", dt_fixed: float = 0.0,
              max_steps: int = 10**9, upwind: bool = False):
    """Advance ``phi2d`` in place; see ``_kernels.integrate`` for the return tuple."""
    if not phi2d.flags.c_contiguous or phi2d.dtype != np.float64:
        raise ValueError("phi must be a C-contiguous float64 array")
    return _impl.integrate(
        phi2d, float(t), float(t_target), *lay.args, float(c_cfl), METHODS[method],
        float(dt_fixed), int(max_steps), upwind,
    )
