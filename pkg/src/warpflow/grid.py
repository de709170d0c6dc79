"""Structured chart grids on the base manifold and their finite-difference stencils.

Axis conventions
----------------
Fields are numpy arrays whose trailing ``grid.n`` axes are the grid axes.
Tensor components come first, so a covariant 2-tensor on a 32x64 sphere grid
has shape ``(2, 2, 32, 64)``.

A ``"pole"`` axis (only axis 0 of a two-dimensional grid) is the colatitude
of a sphere chart.  Its nodes are half-offset, ``theta_i = (i + 1/2) dtheta``,
so no node sits on a pole.  Values beyond a pole are recovered from the
cross-pole partner ``(theta, lam) -> (-theta, lam + pi)``.  A tensor component
changes sign once for every colatitude index it carries.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np

MIN_NODES = 8
TOPOLOGIES = ("periodic", "pole")
SCHEMES = ("centered", "upwind1")


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class ChartGrid:
    nodes: tuple[int, ...]
    spacing: tuple[float, ...]
    topology: tuple[str, ...]
    coords: tuple[np.ndarray, ...] = field(compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes))

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    @property
    def h_max(self) -> float:
        return max(self.spacing)

    @property
    def has_pole(self) -> bool:
        return "pole" in self.topology

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.coords, indexing="ij"))

    def describe(self) -> str:
        dims = "x".join(str(k) for k in self.nodes)
        return f"{dims} ({', '.join(self.topology)})"

    def digest(self, extra: str = "") -> bytes:
        """32-byte fingerprint of the grid layout (plus caller context)."""
        text = f"{self.nodes}|{self.topology}|{extra}"
        return hashlib.sha256(text.encode()).digest()

    def interior_mask(self, cap: float = 0.0) -> np.ndarray:
        """Nodes farther than ``cap`` (radians) from either pole."""
        mask = np.ones(self.shape, dtype=bool)
        if cap > 0 and self.has_pole:
            theta = self.coords[0]
            keep = (theta >= cap) & (theta <= np.pi - cap)
            mask &= keep.reshape((-1,) + (1,) * (self.n - 1))
        return mask

    def component_parity(self, rank: int) -> np.ndarray:
        """Sign picked up by each tensor component across a pole."""
        par = np.ones((self.n,) * rank)
        if not self.has_pole or rank == 0:
            return par
        for idx in itertools.product(range(self.n), repeat=rank):
            par[idx] = (-1.0) ** sum(1 for k in idx if k == 0)
        return par


def build_chart_grid(nodes, topology=None) -> ChartGrid:
    """Build a uniform chart grid.

    ``nodes`` is a per-axis node count.  ``topology`` defaults to all-periodic.
    Periodic axes cover ``[0, 2pi)``; a pole axis covers ``(0, pi)`` with
    half-offset nodes.
    """
    nodes = tuple(int(k) for k in np.atleast_1d(nodes))
    n = len(nodes)
    if n not in (1, 2):
        raise GridError(f"grid dimension must be 1 or 2, got {n}")
    if topology is None:
        topology = ("periodic",) * n
    if isinstance(topology, str):
        topology = (topology,)
    topology = tuple(topology)
    if len(topology) != n:
        raise GridError(f"need {n} topology tags, got {len(topology)}")
    for tag in topology:
        if tag not in TOPOLOGIES:
            raise GridError(f"unknown topology tag {tag!r}")
    if min(nodes) < MIN_NODES:
        raise GridError(f"node count below minimum ({min(nodes)} < {MIN_NODES})")
    if "pole" in topology:
        if n == 1:
            raise GridError("pole-bounded topology requires a two-dimensional grid")
        if topology != ("pole", "periodic"):
            raise GridError("pole-bounded grids must be (pole, periodic)")
        if nodes[1] % 2:
            raise GridError("cross-pole pairing needs an even longitude count")

    spacing = []
    coords = []
    for count, tag in zip(nodes, topology):
        if tag == "periodic":
            d = 2.0 * np.pi / count
            coords.append(d * np.arange(count))
        else:
            d = np.pi / count
            coords.append(d * (np.arange(count) + 0.5))
        spacing.append(d)
    return ChartGrid(nodes, tuple(spacing), topology, tuple(coords))


def pad(f, grid: ChartGrid, parity=1.0, width: int = 1) -> np.ndarray:
    """Surround ``f`` with ``width`` ghost layers on every grid axis.

    ``parity`` broadcasts against the leading (component) axes of ``f``.
    """
    f = np.asarray(f, dtype=float)
    n = grid.n
    lead = f.ndim - n
    par = np.asarray(parity, dtype=float)
    par = par.reshape(par.shape + (1,) * n)
    out = f
    for ax in range(n):
        a = lead + ax
        count = out.shape[a]
        if grid.topology[ax] == "periodic":
            lo = np.take(out, range(count - width, count), axis=a)
            hi = np.take(out, range(width), axis=a)
        else:
            shift = grid.nodes[1] // 2
            lo = np.flip(np.take(out, range(width), axis=a), axis=a)
            hi = np.flip(np.take(out, range(count - width, count), axis=a), axis=a)
            lo = np.roll(lo, shift, axis=a + 1) * par
            hi = np.roll(hi, shift, axis=a + 1) * par
        out = np.concatenate([lo, out, hi], axis=a)
    return out


class Stencil:
    """Second-order finite differences on a chart grid.

    ``scheme="upwind1"`` swaps the centered first derivative for a one-sided
    first-order one.  It exists only as a negative control for the
    refinement checks.
    """

    def __init__(self, grid: ChartGrid, scheme: str = "centered"):
        if scheme not in SCHEMES:
            raise GridError(f"unknown stencil scheme {scheme!r}")
        self.grid = grid
        self.scheme = scheme

    def _shifted(self, P, lead, offsets):
        sl = [slice(None)] * lead
        for ax, off in enumerate(offsets):
            count = P.shape[lead + ax] - 2
            sl.append(slice(1 + off, 1 + off + count))
        return P[tuple(sl)]

    def partial(self, f, axis: int, parity=1.0) -> np.ndarray:
        grid = self.grid
        f = np.asarray(f, dtype=float)
        lead = f.ndim - grid.n
        P = pad(f, grid, parity)
        plus = [0] * grid.n
        plus[axis] = 1
        minus = [0] * grid.n
        minus[axis] = -1
        h = grid.spacing[axis]
        if self.scheme == "upwind1":
            return (self._shifted(P, lead, plus) - f) / h
        return (self._shifted(P, lead, plus) - self._shifted(P, lead, minus)) / (2 * h)

    def gradient(self, f) -> np.ndarray:
        """Partial derivatives of a scalar field, shape ``(n, *grid)``."""
        return np.stack([self.partial(f, ax) for ax in range(self.grid.n)])

    def tensor_gradient(self, T, rank: int) -> np.ndarray:
        """Partial derivatives of tensor components; derivative index goes last."""
        T = np.asarray(T, dtype=float)
        par = self.grid.component_parity(rank)
        parts = [self.partial(T, ax, par) for ax in range(self.grid.n)]
        return np.stack(parts, axis=rank)

    def second_partials(self, f) -> np.ndarray:
        """Compact second partials of a scalar field, shape ``(n, n, *grid)``."""
        grid = self.grid
        f = np.asarray(f, dtype=float)
        n = grid.n
        P = pad(f, grid)
        out = np.empty((n, n) + f.shape)

        def at(*off):
            return self._shifted(P, 0, off)

        for i in range(n):
            e = [0] * n
            e[i] = 1
            m = [-k for k in e]
            out[i, i] = (at(*e) - 2 * f + at(*m)) / grid.spacing[i] ** 2
        if n == 2:
            mixed = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (
                4 * grid.spacing[0] * grid.spacing[1]
            )
            out[0, 1] = out[1, 0] = mixed
        return out
