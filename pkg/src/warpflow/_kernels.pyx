# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flow kernels: phi_t = 1/F and explicit Runge-Kutta stepping.

Fields are (N0, N1) arrays; a one-dimensional grid is passed as (N, 1).
Axis 1 is always periodic.  Axis 0 is periodic, or pole-bounded with
half-offset nodes when ``pole`` is set (ghost row -1-i, column j + N1/2).
"""
from libc.math cimport sqrt, isfinite

import numpy as np


cdef inline int _wrap(int j, int N1) noexcept nogil:
    if j < 0:
        return j + N1
    if j >= N1:
        return j - N1
    return j


cdef int _rhs(const double[:, ::1] phi, double[:, ::1] out,
              const double[:, :, ::1] sinv, const double[:, :, ::1] gam,
              double h0, double h1, bint pole, int n, double sc0, double sc1,
              bint upwind, double* lam_out, Py_ssize_t* bad) noexcept nogil:
    cdef int N0 = phi.shape[0]
    cdef int N1 = phi.shape[1]
    cdef int half = N1 // 2
    cdef int i, j, rn, rs, shn, shs, jp, jm
    cdef double p, pn, ps, pe, pw, d0, d1, d00, d11, d01
    cdef double D00, D01, D11, s00, s01, s11, up0, up1, v2, lap, hqq, F
    cdef double a00, a01, a11, iF2, mid, rad, lam, lam_max = 0.0
    cdef double ih0 = 1.0 / h0
    cdef double ih1 = 1.0 / h1
    cdef bint flat1 = N1 == 1
    for i in range(N0):
        # neighbour rows; across a pole the partner column is shifted by N1/2
        rn = i - 1
        rs = i + 1
        shn = 0
        shs = 0
        if i == 0:
            if pole:
                rn = 0
                shn = half
            else:
                rn = N0 - 1
        if i == N0 - 1:
            if pole:
                rs = N0 - 1
                shs = half
            else:
                rs = 0
        for j in range(N1):
            p = phi[i, j]
            pn = phi[rn, _wrap(j + shn, N1)]
            ps = phi[rs, _wrap(j + shs, N1)]
            if upwind:
                d0 = (ps - p) * ih0
            else:
                d0 = 0.5 * (ps - pn) * ih0
            d00 = (ps - 2.0 * p + pn) * ih0 * ih0
            if flat1:
                d1 = 0.0
                d11 = 0.0
                d01 = 0.0
            else:
                jp = _wrap(j + 1, N1)
                jm = _wrap(j - 1, N1)
                pe = phi[i, jp]
                pw = phi[i, jm]
                if upwind:
                    d1 = (pe - p) * ih1
                else:
                    d1 = 0.5 * (pe - pw) * ih1
                d11 = (pe - 2.0 * p + pw) * ih1 * ih1
                d01 = 0.25 * ih0 * ih1 * (
                    phi[rs, _wrap(jp + shs, N1)]
                    - phi[rs, _wrap(jm + shs, N1)]
                    - phi[rn, _wrap(jp + shn, N1)]
                    + phi[rn, _wrap(jm + shn, N1)]
                )
            D00 = d00 - gam[0, i, j] * d0 - gam[3, i, j] * d1
            D01 = d01 - gam[1, i, j] * d0 - gam[4, i, j] * d1
            D11 = d11 - gam[2, i, j] * d0 - gam[5, i, j] * d1
            s00 = sinv[0, i, j]
            s01 = sinv[1, i, j]
            s11 = sinv[2, i, j]
            up0 = s00 * d0 + s01 * d1
            up1 = s01 * d0 + s11 * d1
            v2 = 1.0 + up0 * d0 + up1 * d1
            lap = s00 * D00 + 2.0 * s01 * D01 + s11 * D11
            hqq = up0 * up0 * D00 + 2.0 * up0 * up1 * D01 + up1 * up1 * D11
            F = (n - lap + hqq / v2) / v2
            if not isfinite(F):
                bad[0] = i * N1 + j
                return 2
            if F <= 0.0:
                bad[0] = i * N1 + j
                return 1
            out[i, j] = 1.0 / F
            iF2 = 1.0 / (F * F * v2)
            a00 = (s00 - up0 * up0 / v2) * iF2 * sc0 * sc0
            a01 = (s01 - up0 * up1 / v2) * iF2 * sc0 * sc1
            a11 = (s11 - up1 * up1 / v2) * iF2 * sc1 * sc1
            mid = 0.5 * (a00 + a11)
            rad = sqrt(0.25 * (a00 - a11) * (a00 - a11) + a01 * a01)
            lam = mid + rad
            if not isfinite(lam):
                bad[0] = i * N1 + j
                return 3
            if lam > lam_max:
                lam_max = lam
    lam_out[0] = lam_max
    return 0


def rhs(const double[:, ::1] phi, const double[:, :, ::1] sinv, const double[:, :, ::1] gam,
        double h0, double h1, bint pole, int n, double sc0, double sc1, bint upwind=False):
    """Return (phi_t, Lambda_max, status, bad_index)."""
    out = np.zeros((phi.shape[0], phi.shape[1]))
    cdef double[:, ::1] o = out
    cdef double lam = 0.0
    cdef Py_ssize_t bad = -1
    cdef int status
    with nogil:
        status = _rhs(phi, o, sinv, gam, h0, h1, pole, n, sc0, sc1, upwind, &lam, &bad)
    return out, lam, status, bad


def integrate(double[:, ::1] phi, double t, double t_target,
              const double[:, :, ::1] sinv, const double[:, :, ::1] gam,
              double h0, double h1, bint pole, int n, double sc0, double sc1,
              double c_cfl, int method, double dt_fixed, long max_steps, bint upwind=False):
    """Advance ``phi`` in place from t to exactly t_target.

    ``method`` is 2 (Heun) or 4 (classical RK4).  Returns
    (t, steps, status, bad_index, last_dt); status 0 is success, 1 mean
    curvature sign loss, 2 non-finite F, 3 non-finite Lambda, 4 step budget.
    """
    cdef int N0 = phi.shape[0]
    cdef int N1 = phi.shape[1]
    k1a = np.zeros((N0, N1)); k2a = np.zeros((N0, N1))
    k3a = np.zeros((N0, N1)); k4a = np.zeros((N0, N1)); wa = np.zeros((N0, N1))
    cdef double[:, ::1] k1 = k1a
    cdef double[:, ::1] k2 = k2a
    cdef double[:, ::1] k3 = k3a
    cdef double[:, ::1] k4 = k4a
    cdef double[:, ::1] w = wa
    cdef double lam = 0.0, dlam = 0.0, dt = 0.0, remaining, hmin
    cdef Py_ssize_t bad = -1
    cdef long steps = 0
    cdef int status = 0, i, j
    cdef bint last
    hmin = h0 if h0 < h1 else h1
    if N1 == 1:
        hmin = h0
    with nogil:
        while t < t_target:
            if steps >= max_steps:
                status = 4
                break
            status = _rhs(phi, k1, sinv, gam, h0, h1, pole, n, sc0, sc1, upwind, &lam, &bad)
            if status:
                break
            if dt_fixed > 0:
                dt = dt_fixed
            else:
                dt = c_cfl * hmin * hmin / (2.0 * n * lam)
            remaining = t_target - t
            last = dt >= remaining
            if last:
                dt = remaining
            if method == 2:
                for i in range(N0):
                    for j in range(N1):
                        w[i, j] = phi[i, j] + dt * k1[i, j]
                status = _rhs(w, k2, sinv, gam, h0, h1, pole, n, sc0, sc1, upwind, &dlam, &bad)
                if status:
                    break
                for i in range(N0):
                    for j in range(N1):
                        phi[i, j] = phi[i, j] + 0.5 * dt * (k1[i, j] + k2[i, j])
            else:
                for i in range(N0):
                    for j in range(N1):
                        w[i, j] = phi[i, j] + 0.5 * dt * k1[i, j]
                status = _rhs(w, k2, sinv, gam, h0, h1, pole, n, sc0, sc1, upwind, &dlam, &bad)
                if status:
                    break
                for i in range(N0):
                    for j in range(N1):
                        w[i, j] = phi[i, j] + 0.5 * dt * k2[i, j]
                status = _rhs(w, k3, sinv, gam, h0, h1, pole, n, sc0, sc1, upwind, &dlam, &bad)
                if status:
                    break
                for i in range(N0):
                    for j in range(N1):
                        w[i, j] = phi[i, j] + dt * k3[i, j]
                status = _rhs(w, k4, sinv, gam, h0, h1, pole, n, sc0, sc1, upwind, &dlam, &bad)
                if status:
                    break
                for i in range(N0):
                    for j in range(N1):
                        phi[i, j] = phi[i, j] + dt / 6.0 * (
                            k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
            steps += 1
            if last:
                t = t_target
            else:
                t = t + dt
    return t, steps, status, bad, dt
