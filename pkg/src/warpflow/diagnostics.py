"""Monitored bounds, evolution-equation cross-checks, rate fits and asymptotics.

The flow is integrated at fixed chart nodes, so the graph is the normal flow
composed with a tangential reparametrization.  With T^k = phi^k / (u v H) the
time derivatives at fixed nodes pick up Lie-derivative terms:

    d/dt g_ij       = 2 h_ij / H + nabla_i T_j + nabla_j T_i
    d/dt log sqrt g = 1 + div T
    d/dt H          = -Lap(1/H) - (|A|^2 + Ricbar(nu, nu)) / H + T^k d_k H

The cross-checks compare these against centred time differences.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .basegeom import MetricField
from .graph import GraphGeometry, ambient_ricci_normal, connection_difference, graph_geometry
from .grid import Stencil
from .tensor import connection_terms, covariant_derivative, norm, sym_det

CROSSCHECK_CAP = np.pi / 6
MIN_FIT_SAMPLES = 10


@dataclass
class Breach:
    monitor: str
    t: float
    gap: float
    tolerance: float
    severity: str  # "warn" | "fatal"


@dataclass
class Baseline:
    """Initial-data constants every later sample is compared against."""

    n: int
    tolerance: float
    warn_factor: float
    phi_min: float
    phi_max: float
    u_min: float
    u_max: float
    phidot_min: float
    phidot_max: float
    speed_min: float
    speed_max: float
    grad_sq_max: float
    v_max: float
    area0: float
    base_area: float
    r_inf: float
    delta_ric: float
    mu_run: float = math.inf
    F_sup_run: float = 0.0

    @property
    def H_lower(self) -> float:
        return self.speed_min / self.u_max

    @property
    def H_upper(self) -> float:
        return self.speed_max * self.v_max / self.u_min

    @property
    def ricci_positive(self) -> bool:
        return self.delta_ric > 0

    def lambda_cert(self) -> float:
        if not self.ricci_positive or self.F_sup_run <= 0:
            return 0.0
        return 2.0 * self.mu_run * self.delta_ric / self.F_sup_run**2


@dataclass
class DiagnosticsRecord:
    t: float
    step: int
    area: float
    area_ratio: float
    area_law_error: float
    rescaled_area: float
    phi_resc_min: float
    phi_resc_max: float
    u_resc_min: float
    u_resc_max: float
    phidot_min: float
    phidot_max: float
    speed_min: float
    speed_max: float
    H_resc_min: float
    H_resc_max: float
    grad_sq_max: float
    du_resc_max: float
    d2u_resc_max: float
    chi_max: float
    mu_min: float
    F_sup: float
    r_inf: float
    r_inf_est: float
    u_gap: float
    g_gap: float
    h_gap: float
    g_gap_est: float
    h_gap_est: float
    lambda_cert: float
    gradient_decay_gap: float
    H_form_discrepancy: float
    ricci_positive: bool
    condition: str
    tolerance: float
    breaches: int
    worst: str
    xc_metric: float = math.nan
    xc_inverse_metric: float = math.nan
    xc_inverse_metric_alt: float = math.nan
    xc_measure: float = math.nan
    xc_rescaled_measure: float = math.nan
    xc_mean_curvature: float = math.nan
    xc_dt: float = math.nan

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_row(self) -> dict:
        return asdict(self)


@dataclass
class RateFit:
    quantity: str
    t_start: float
    t_end: float
    rate: float
    r_squared: float
    samples: int
    note: str = ""


def area(geo: GraphGeometry, metric: MetricField) -> float:
    """|M_t| = sum sqrt(det g) * cell volume (midpoint in colatitude)."""
    return float(np.sum(np.sqrt(sym_det(geo.g))) * metric.grid.cell_volume)


def r_infinity(area0: float, base_area: float, n: int) -> float:
    if not (area0 > 0 and base_area > 0):
        raise ValueError("areas must be positive")
    return (area0 / base_area) ** (1.0 / n)


def tolerance_for(grid, absolute: float = 1e-6, discretization: float = 10.0) -> float:
    return absolute + discretization * grid.h_max**2


def make_baseline(geo: GraphGeometry, metric: MetricField, *, tolerance: float,
                  warn_factor: float = 10.0, r_inf: float | None = None) -> Baseline:
    n = metric.n
    a0 = area(geo, metric)
    base_area = metric.exact_area
    b = Baseline(
        n=n,
        tolerance=tolerance,
        warn_factor=warn_factor,
        phi_min=float(geo.phi.min()),
        phi_max=float(geo.phi.max()),
        u_min=float(geo.u.min()),
        u_max=float(geo.u.max()),
        phidot_min=float((1 / geo.F).min()),
        phidot_max=float((1 / geo.F).max()),
        speed_min=float(geo.F.min()),
        speed_max=float(geo.F.max()),
        grad_sq_max=float(geo.grad_sq.max()),
        v_max=float(geo.v.max()),
        area0=a0,
        base_area=base_area,
        r_inf=r_inf if r_inf is not None else r_infinity(a0, base_area, n),
        delta_ric=metric.delta_ric,
    )
    return b


def condition_flag(baseline: Baseline) -> str:
    if baseline.ricci_positive:
        return "ok"
    if baseline.n == 1:
        return "Ric>0 violated (n=1); empirical only"
    return "Ric>0 violated"


def _range_gap(lo, hi, ref_lo, ref_hi) -> float:
    return max(ref_lo - lo, hi - ref_hi, 0.0)


def _mixed_norm(M, sigma, sigma_inv):
    sq = np.einsum("ik...,jl...,ij...,kl...->...", sigma, sigma_inv, M, M)
    return np.sqrt(np.maximum(sq, 0.0))


def monitors(t: float, step: int, geo: GraphGeometry, metric: MetricField, baseline: Baseline,
             update_running: bool = True) -> tuple[DiagnosticsRecord, list[Breach]]:
    """One diagnostics sample; the baseline's running extrema are updated in place."""
    b = baseline
    n = metric.n
    s, si = metric.sigma, metric.sigma_inv
    scale = math.exp(-t / n)
    if update_running:
        b.mu_run = min(b.mu_run, geo.mu)
        b.F_sup_run = max(b.F_sup_run, float(geo.F.max()))
    phi_r = geo.phi - t / n
    u_r = geo.u * scale
    phidot = 1.0 / geo.F
    H_r = geo.H / scale
    A = area(geo, metric)
    lam = b.lambda_cert()

    w = metric.sqrt_det / metric.sqrt_det.sum()
    r_est = float(np.sum(u_r * w))
    g_r = geo.g * scale**2
    W_r = geo.weingarten / scale
    eye = np.eye(n).reshape((n, n) + (1,) * n)

    def gaps(r):
        return (
            float(np.max(norm(g_r - r**2 * s, si))),
            float(np.max(_mixed_norm(W_r - eye / r, s, si))),
        )

    g_gap, h_gap = gaps(b.r_inf)
    g_gap_est, h_gap_est = gaps(r_est)
    dd = np.einsum("i...,j...->ij...", geo.dphi, geo.dphi)
    d2u = u_r * norm(geo.hess + dd, si)
    grad_gap = float(geo.grad_sq.max()) * math.exp(lam * t) - b.grad_sq_max

    checks = [
        ("phi_bound", _range_gap(phi_r.min(), phi_r.max(), b.phi_min, b.phi_max), True),
        ("u_bound", _range_gap(u_r.min(), u_r.max(), b.u_min, b.u_max), True),
        ("phidot_range", _range_gap(phidot.min(), phidot.max(), b.phidot_min, b.phidot_max), True),
        ("speed_range", _range_gap(geo.F.min(), geo.F.max(), b.speed_min, b.speed_max), True),
        ("H_lower", max(b.H_lower - H_r.min(), 0.0), True),
        ("H_upper", max(H_r.max() - b.H_upper, 0.0), b.ricci_positive),
        ("gradient_decay", max(grad_gap, 0.0), b.ricci_positive),
    ]
    breaches = []
    for name, gap, enforced in checks:
        if gap <= b.tolerance:
            continue
        if not enforced:
            continue
        severity = "warn" if gap <= b.warn_factor * b.tolerance else "fatal"
        breaches.append(Breach(name, t, float(gap), b.tolerance, severity))
    worst = "ok"
    if breaches:
        worst = "fatal" if any(x.severity == "fatal" for x in breaches) else "warn"

    rec = DiagnosticsRecord(
        t=t,
        step=step,
        area=A,
        area_ratio=A / b.area0,
        area_law_error=A / b.area0 / math.exp(t) - 1.0,
        rescaled_area=A * math.exp(-t),
        phi_resc_min=float(phi_r.min()),
        phi_resc_max=float(phi_r.max()),
        u_resc_min=float(u_r.min()),
        u_resc_max=float(u_r.max()),
        phidot_min=float(phidot.min()),
        phidot_max=float(phidot.max()),
        speed_min=float(geo.F.min()),
        speed_max=float(geo.F.max()),
        H_resc_min=float(H_r.min()),
        H_resc_max=float(H_r.max()),
        grad_sq_max=float(geo.grad_sq.max()),
        du_resc_max=float(np.max(u_r * np.sqrt(geo.grad_sq))),
        d2u_resc_max=float(np.max(d2u)),
        chi_max=float(geo.chi.max()),
        mu_min=float(geo.mu),
        F_sup=float(geo.F.max()),
        r_inf=b.r_inf,
        r_inf_est=r_est,
        u_gap=float(np.max(np.abs(u_r - b.r_inf))),
        g_gap=g_gap,
        h_gap=h_gap,
        g_gap_est=g_gap_est,
        h_gap_est=h_gap_est,
        lambda_cert=lam,
        gradient_decay_gap=grad_gap,
        H_form_discrepancy=geo.H_discrepancy,
        ricci_positive=b.ricci_positive,
        condition=condition_flag(b),
        tolerance=b.tolerance,
        breaches=len(breaches),
        worst=worst,
    )
    return rec, breaches


def _laplace(f, geo, metric, C, stencil):
    df = stencil.gradient(f)
    hess = stencil.second_partials(f) - np.einsum("mij...,m...->ij...", metric.christoffel + C, df)
    return np.einsum("ij...,ij...->...", geo.g_inv, hess), df


def evolution_crosschecks(phis, delta: float, t_mid: float, metric: MetricField,
                          stencil: Stencil | None = None, cap: float = CROSSCHECK_CAP) -> dict:
    """Residuals of the evolution equations at the middle of (t - delta, t, t + delta).

    ``phis`` are the three phi fields; ``t_mid`` is the middle time (enters
    only through the rescaling).
    """
    stencil = stencil or Stencil(metric.grid)
    geos = [graph_geometry(p, metric, stencil, check_parabolic=False) for p in phis]
    a, mid, c = geos
    C = connection_difference(mid, metric)
    u, v, H = mid.u, mid.v, mid.H
    up = np.einsum("ij...,j...->i...", metric.sigma_inv, mid.dphi)
    T_low = (u * v / H) * mid.dphi
    T_up = up / (u * v * H)
    NT = covariant_derivative(T_low, (False,), metric.christoffel, stencil)
    NT = NT + connection_terms(T_low, (False,), C)  # [j, i] = nabla_i T_j
    LT = NT + np.einsum("ji...->ij...", NT)
    divT = np.einsum("ij...,ji...->...", mid.g_inv, NT)

    mask = metric.grid.interior_mask(cap)
    two = 2.0 * delta

    gdot = (c.g - a.g) / two
    res_g = norm(gdot - 2 * mid.h / H - LT, mid.g_inv)

    ginv_dot = (c.g_inv - a.g_inv) / two
    gi = mid.g_inv
    raise_ = lambda T: np.einsum("ik...,jl...,kl...->ij...", gi, gi, T)  # noqa: E731
    res_ginv = norm(ginv_dot + raise_(2 * mid.h / H + LT), mid.g)
    # H in place of 1/H: a control that must not converge
    res_ginv_alt = norm(ginv_dot + raise_(2 * mid.h * H + LT), mid.g)

    logsq = [0.5 * np.log(sym_det(x.g)) for x in geos]
    dlog = (logsq[2] - logsq[0]) / two
    res_mu = np.abs(dlog - 1.0 - divT)
    t_a, t_c = t_mid - delta, t_mid + delta
    logsq_r = (logsq[2] - t_c) - (logsq[0] - t_a)
    res_mu_r = np.abs(logsq_r / two - divT)

    Hdot = (c.H - a.H) / two
    lapinv, _ = _laplace(1.0 / H, mid, metric, C, stencil)
    dH = stencil.gradient(H)
    ric_nu = ambient_ricci_normal(mid, metric)
    rhs_H = -lapinv - (mid.second_fundamental_norm_sq + ric_nu) / H
    rhs_H = rhs_H + np.einsum("k...,k...->...", T_up, dH)
    res_H = np.abs(Hdot - rhs_H)

    return {
        "metric": float(np.max(res_g[mask])),
        "inverse_metric": float(np.max(res_ginv[mask])),
        "inverse_metric_alt": float(np.max(res_ginv_alt[mask])),
        "measure": float(np.max(res_mu[mask])),
        "rescaled_measure": float(np.max(res_mu_r[mask])),
        "mean_curvature": float(np.max(res_H[mask])),
        "area_rate": float(
            abs(math.log(area(c, metric) / area(a, metric)) / two - 1.0)
        ),
        "dt": delta,
    }


def fit_rate(t, y, name: str = "", window: tuple | None = None, second_half: bool = True) -> RateFit:
    """Least-squares slope of log(y) against t over the second half of the window."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, y = t[keep], y[keep]
    if second_half and len(t):
        mid = t[0] + 0.5 * (t[-1] - t[0])
        keep = t >= mid
        t, y = t[keep], y[keep]
    note = ""
    pos = y > 0
    if not pos.all():
        note = f"trimmed {int((~pos).sum())} non-positive samples"
        t, y = t[pos], y[pos]
    if len(t) < MIN_FIT_SAMPLES:
        raise ValueError(f"fit window for {name or 'series'} has {len(t)} samples (< {MIN_FIT_SAMPLES})")
    logy = np.log(y)
    slope, icept = np.polyfit(t, logy, 1)
    pred = slope * t + icept
    ss_res = float(np.sum((logy - pred) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(name, float(t[0]), float(t[-1]), float(slope), r2, len(t), note)


ASYMPTOTIC_GAPS = ("u_gap", "g_gap", "h_gap")


def asymptotics_report(records, r_inf: float | None = None) -> dict:
    """Initial/final asymptotic gaps, their reduction factors and fitted rates."""
    if not records:
        raise ValueError("no diagnostics records")
    first, last = records[0], records[-1]
    t = [r.t for r in records]
    out = {"r_inf": r_inf if r_inf is not None else last.r_inf, "r_inf_est": last.r_inf_est,
           "t_final": last.t, "gaps": {}}
    for name in ASYMPTOTIC_GAPS:
        g0, g1 = getattr(first, name), getattr(last, name)
        try:
            fit = fit_rate(t, [getattr(r, name) for r in records], name)
        except ValueError:
            fit = None
        out["gaps"][name] = {
            "initial": g0,
            "final": g1,
            "reduction": g0 / g1 if g1 > 0 else math.inf,
            "rate": fit.rate if fit else math.nan,
            "r_squared": fit.r_squared if fit else math.nan,
        }
    out["r_inf_rel_error"] = abs(last.r_inf_est / out["r_inf"] - 1.0)
    return out
