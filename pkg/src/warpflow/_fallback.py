"""Pure numpy twin of the compiled kernels (same signatures, same arithmetic order
up to vectorization)."""
from __future__ import annotations

import numpy as np


def _neighbours(phi, pole: bool):
    """Padded copy of phi with one ghost layer on each side of both axes."""
    N0, N1 = phi.shape
    if pole:
        top = np.roll(phi[:1], N1 // 2, axis=1)
        bot = np.roll(phi[-1:], N1 // 2, axis=1)
    else:
        top, bot = phi[-1:], phi[:1]
    P = np.concatenate([top, phi, bot], axis=0)
    return np.concatenate([P[:, -1:], P, P[:, :1]], axis=1)


def rhs(phi, sinv, gam, h0, h1, pole, n, sc0, sc1, upwind=False):
    phi = np.asarray(phi, dtype=float)
    N0, N1 = phi.shape
    P = _neighbours(phi, bool(pole))
    c = P[1:-1, 1:-1]
    pn, ps = P[:-2, 1:-1], P[2:, 1:-1]
    d0 = (ps - c) / h0 if upwind else 0.5 * (ps - pn) / h0
    d00 = (ps - 2.0 * c + pn) / (h0 * h0)
    if N1 == 1:
        d1 = d11 = d01 = np.zeros_like(phi)
    else:
        pe, pw = P[1:-1, 2:], P[1:-1, :-2]
        d1 = (pe - c) / h1 if upwind else 0.5 * (pe - pw) / h1
        d11 = (pe - 2.0 * c + pw) / (h1 * h1)
        d01 = 0.25 / (h0 * h1) * (P[2:, 2:] - P[2:, :-2] - P[:-2, 2:] + P[:-2, :-2])
    D00 = d00 - gam[0] * d0 - gam[3] * d1
    D01 = d01 - gam[1] * d0 - gam[4] * d1
    D11 = d11 - gam[2] * d0 - gam[5] * d1
    s00, s01, s11 = sinv[0], sinv[1], sinv[2]
    up0 = s00 * d0 + s01 * d1
    up1 = s01 * d0 + s11 * d1
    v2 = 1.0 + up0 * d0 + up1 * d1
    lap = s00 * D00 + 2.0 * s01 * D01 + s11 * D11
    hqq = up0 * up0 * D00 + 2.0 * up0 * up1 * D01 + up1 * up1 * D11
    with np.errstate(all="ignore"):
        F = (n - lap + hqq / v2) / v2
        bad = ~np.isfinite(F)
        if bad.any():
            return None, 0.0, 2, int(np.flatnonzero(bad)[0])
        bad = F <= 0
        if bad.any():
            return None, 0.0, 1, int(np.flatnonzero(bad)[0])
        out = 1.0 / F
        iF2 = 1.0 / (F * F * v2)
        a00 = (s00 - up0 * up0 / v2) * iF2 * sc0 * sc0
        a01 = (s01 - up0 * up1 / v2) * iF2 * sc0 * sc1
        a11 = (s11 - up1 * up1 / v2) * iF2 * sc1 * sc1
        lam = 0.5 * (a00 + a11) + np.sqrt(0.25 * (a00 - a11) ** 2 + a01 * a01)
    bad = ~np.isfinite(lam)
    if bad.any():
        return None, 0.0, 3, int(np.flatnonzero(bad)[0])
    return out, float(max(lam.max(), 0.0)), 0, -1


def integrate(phi, t, t_target, sinv, gam, h0, h1, pole, n, sc0, sc1,
              c_cfl, method, dt_fixed, max_steps, upwind=False):
    hmin = h0 if phi.shape[1] == 1 else min(h0, h1)
    args = (sinv, gam, h0, h1, pole, n, sc0, sc1, upwind)
    steps, status, bad, dt = 0, 0, -1, 0.0
    while t < t_target:
        if steps >= max_steps:
            status = 4
            break
        k1, lam, status, bad = rhs(phi, *args)
        if status:
            break
        dt = dt_fixed if dt_fixed > 0 else c_cfl * hmin * hmin / (2.0 * n * lam)
        remaining = t_target - t
        last = dt >= remaining
        if last:
            dt = remaining
        if method == 2:
            k2, _, status, bad = rhs(phi + dt * k1, *args)
            if status:
                break
            phi += 0.5 * dt * (k1 + k2)
        else:
            k2, _, status, bad = rhs(phi + 0.5 * dt * k1, *args)
            if status:
                break
            k3, _, status, bad = rhs(phi + 0.5 * dt * k2, *args)
            if status:
                break
            k4, _, status, bad = rhs(phi + dt * k3, *args)
            if status:
                break
            phi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        steps += 1
        t = t_target if last else t + dt
    return t, steps, status, bad, dt
