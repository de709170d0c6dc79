"""Named initial profiles u0 > 0, evaluated on any chart grid."""
from __future__ import annotations

import numpy as np

from .errors import InputError
from .identities import random_graph


def initial_u(profile: str, params: dict, grid, preset: str = "") -> np.ndarray:
    """Sample u0 on ``grid``; raises InputError unless u0 > 0 everywhere."""
    coords = grid.mesh()
    theta = coords[0]
    if profile == "constant":
        u = np.full(grid.shape, float(params.get("r0", 1.0)))
    elif profile == "cosine":
        # u0 = sum_k c_k cos(k theta) along the first chart axis
        u = sum(c * np.cos(k * theta) for k, c in enumerate(params["coefficients"]))
        u = np.asarray(u, dtype=float) * np.ones(grid.shape)
    elif profile == "ellipse":
        if grid.n != 1:
            raise InputError("the ellipse profile needs a one-dimensional base")
        a, b = params["axes"]
        u = 1.0 / np.sqrt((np.cos(theta) / a) ** 2 + (np.sin(theta) / b) ** 2)
    elif profile == "random":
        phi = np.log(params.get("r0", 1.0)) + random_graph(
            grid, preset, seed=int(params.get("seed", 0)), amplitude=float(params.get("amplitude", 0.1))
        )
        u = np.exp(phi)
    else:
        raise InputError(f"unknown profile {profile!r}")
    bad = np.argwhere(~(u > 0))
    if bad.size:
        node = tuple(int(k) for k in bad[0])
        raise InputError(f"initial height u0 must be positive (node {node})")
    return u


def initial_phi(profile: str, params: dict, grid, preset: str = "") -> np.ndarray:
    return np.log(initial_u(profile, params, grid, preset))
