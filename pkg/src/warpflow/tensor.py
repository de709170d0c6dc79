"""Pointwise tensor algebra for fields with leading component axes.

Everything here is closed form for n <= 2 (with n + 1 <= 3 for ambient
quantities handled by ``numpy.linalg`` where needed).
"""
from __future__ import annotations

import itertools
import string

import numpy as np


def sym_det(T: np.ndarray) -> np.ndarray:
    n = T.shape[0]
    if n == 1:
        return T[0, 0].copy()
    if n == 2:
        return T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
    return np.linalg.det(np.moveaxis(T, (0, 1), (-2, -1)))


def sym_inv(T: np.ndarray) -> np.ndarray:
    """Inverse of a field of 1x1 or 2x2 matrices."""
    n = T.shape[0]
    if n == 1:
        return 1.0 / T
    if n == 2:
        det = sym_det(T)
        out = np.empty_like(T)
        out[0, 0] = T[1, 1] / det
        out[1, 1] = T[0, 0] / det
        out[0, 1] = -T[0, 1] / det
        out[1, 0] = -T[1, 0] / det
        return out
    moved = np.moveaxis(T, (0, 1), (-2, -1))
    return np.moveaxis(np.linalg.inv(moved), (-2, -1), (0, 1))


def pencil_eigvals(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smallest and largest roots of det(A - lam B) = 0, node by node.

    A symmetric, B symmetric positive definite.
    """
    n = A.shape[0]
    if n == 1:
        lam = A[0, 0] / B[0, 0]
        return lam, lam
    # eigenvalues of the mixed tensor B^-1 A, in a cancellation-free form
    M = np.einsum("ik...,kj...->ij...", sym_inv(B), A)
    mid = 0.5 * (M[0, 0] + M[1, 1])
    disc = np.sqrt(np.maximum((0.5 * (M[0, 0] - M[1, 1])) ** 2 + M[0, 1] * M[1, 0], 0.0))
    return mid - disc, mid + disc


def sym_eigvals(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Min and max eigenvalue of a field of symmetric 1x1/2x2 matrices."""
    if M.shape[0] == 1:
        return M[0, 0], M[0, 0]
    half_tr = 0.5 * (M[0, 0] + M[1, 1])
    rad = np.sqrt((0.5 * (M[0, 0] - M[1, 1])) ** 2 + M[0, 1] ** 2)
    return half_tr - rad, half_tr + rad


def norm(T: np.ndarray, inverses) -> np.ndarray:
    """Pointwise norm of a covariant tensor.

    ``inverses`` lists one inverse metric per index (a single array is
    reused for every index).  Index slots must all be covariant.
    """
    rank = len(inverses) if isinstance(inverses, (list, tuple)) else None
    if rank is None:
        rank = T.ndim - inverses.ndim + 2
        inverses = [inverses] * rank
    if rank == 0:
        return np.abs(T)
    letters = string.ascii_lowercase
    a = letters[:rank]
    b = letters[rank : 2 * rank]
    ops = [f"{a[k]}{b[k]}..." for k in range(rank)]
    expr = ",".join(ops + [f"{a}...", f"{b}..."]) + "->..."
    sq = np.einsum(expr, *inverses, T, T)
    return np.sqrt(np.maximum(sq, 0.0))


def connection_terms(T: np.ndarray, up: tuple[bool, ...], Gamma: np.ndarray) -> np.ndarray:
    """Christoffel part of a covariant derivative.

    Returns ``C`` with the derivative index appended last so that
    ``nabla_p T = partial_p T + C[..., p]``.  ``Gamma[k, i, j]`` holds
    the symbol with upper index k.
    """
    rank = len(up)
    n = Gamma.shape[0]
    shape = (n,) * (rank + 1) + T.shape[rank:]
    out = np.zeros(shape)
    letters = string.ascii_lowercase
    idx = letters[:rank]
    p, e = "p", "z"
    for q, is_up in enumerate(up):
        src = idx[:q] + e + idx[q + 1 :]
        if is_up:
            out += np.einsum(f"{idx[q]}{p}{e}...,{src}...->{idx}{p}...", Gamma, T)
        else:
            out -= np.einsum(f"{e}{p}{idx[q]}...,{src}...->{idx}{p}...", Gamma, T)
    return out


def covariant_derivative(T, up, Gamma, stencil) -> np.ndarray:
    """Stencil partials plus Christoffel terms; derivative index last."""
    return stencil.tensor_gradient(T, len(up)) + connection_terms(T, tuple(up), Gamma)


def identity(n: int, shape) -> np.ndarray:
    eye = np.zeros((n, n) + tuple(shape))
    for i in range(n):
        eye[i, i] = 1.0
    return eye


def is_symmetric(T: np.ndarray, tol: float) -> bool:
    n = T.shape[0]
    return all(
        np.max(np.abs(T[i, j] - T[j, i])) <= tol
        for i, j in itertools.combinations(range(n), 2)
    )
