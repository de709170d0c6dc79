"""Method-of-lines integration of phi_t = 1/F(D phi, D^2 phi).

The time loop advances between target times (diagnostics and checkpoint
cadences, computed as k * cadence rather than accumulated), so a run resumed
from a checkpoint takes exactly the same steps as an unbroken run.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .basegeom import MetricError, MetricField, eval_metric
from .config import RunConfig
from .diagnostics import (
    Baseline,
    DiagnosticsRecord,
    area,
    evolution_crosschecks,
    make_baseline,
    monitors,
    r_infinity,
    tolerance_for,
)
from .errors import InputError, MonitorBreach, NumericalFatal
from .graph import GraphError, GraphGeometry, GraphState, ParabolicityError, graph_geometry
from .grid import GridError, Stencil, build_chart_grid
from .initial import initial_phi
from . import io

log = logging.getLogger(__name__)

STATUS_MESSAGES = {
    1: "mean curvature sign loss",
    2: "non-finite speed",
    3: "non-finite stability bound",
    4: "step budget exhausted",
}
CROSSCHECK_STEPS = 16
ORACLE_REFINEMENT = 4


@dataclass
class RescaledView:
    t: float
    u: np.ndarray
    phi: np.ndarray
    g: np.ndarray
    weingarten: np.ndarray
    H: np.ndarray
    sqrt_det: np.ndarray


@dataclass
class Trajectory:
    records: list
    checkpoints: list
    status: str  # "reached-t_end" | "fatal-breach" | "numerical-fatal" | "user-stop"
    state: GraphState
    baseline: Baseline
    message: str = ""
    breaches: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return {"reached-t_end": 0, "user-stop": 0, "fatal-breach": 3, "numerical-fatal": 4}[self.status]


@dataclass
class FlowSetup:
    config: RunConfig
    metric: MetricField
    stencil: Stencil
    layout: kernels.KernelLayout
    grid_hash: bytes

    @property
    def grid(self):
        return self.metric.grid


def setup(config: RunConfig) -> FlowSetup:
    try:
        grid = build_chart_grid(config.discretization.nodes, config.topology)
        metric = eval_metric(config.manifold.preset, config.manifold.params, grid)
    except (GridError, MetricError) as exc:
        raise InputError(str(exc)) from None
    stencil = Stencil(grid, config.discretization.stencil)
    ghash = grid.digest(metric.label())
    return FlowSetup(config, metric, stencil, kernels.layout(metric), ghash)


def _as2d(phi, lay):
    return np.ascontiguousarray(np.asarray(phi, dtype=float).reshape(lay.shape2d))


def _node(metric, flat):
    return tuple(int(k) for k in np.unravel_index(int(flat), metric.grid.shape))


def rhs(phi, metric: MetricField, lay=None, upwind: bool = False) -> np.ndarray:
    """phi_t = 1/F pointwise; F <= 0 is fatal."""
    lay = lay or kernels.layout(metric)
    out, _, status, bad = kernels.rhs(_as2d(phi, lay), lay, upwind)
    if status:
        raise NumericalFatal(f"{STATUS_MESSAGES[status]} at node {_node(metric, bad)}")
    return out.reshape(metric.grid.shape)


def stable_dt(phi, metric: MetricField, c_cfl: float = 0.5, lay=None) -> float:
    """c_cfl * h_min^2 / (2 n Lambda), Lambda the largest eigenvalue of F^-2 a^ij."""
    if not 0 < c_cfl <= 1:
        raise ValueError("c_cfl out of (0,1]")
    lay = lay or kernels.layout(metric)
    _, lam, status, bad = kernels.rhs(_as2d(phi, lay), lay)
    if status:
        raise NumericalFatal(f"{STATUS_MESSAGES[status]} at node {_node(metric, bad)}")
    if not (math.isfinite(lam) and lam > 0):
        raise NumericalFatal(f"stability bound not finite (Lambda = {lam})")
    return c_cfl * metric.grid.h_min**2 / (2 * metric.n * lam)


def advance(state: GraphState, t_target: float, metric: MetricField, *, lay=None,
            c_cfl: float = 0.5, method: str = "rk4", dt_fixed: float = 0.0,
            max_steps: int = 10**9, upwind: bool = False) -> GraphState:
    """Integrate to exactly ``t_target``; raises NumericalFatal carrying the last good state."""
    lay = lay or kernels.layout(metric)
    phi = _as2d(state.phi, lay).copy()
    t, steps, status, bad, _ = kernels.integrate(
        phi, state.t, t_target, lay, c_cfl=c_cfl, method=method, dt_fixed=dt_fixed,
        max_steps=max_steps, upwind=upwind,
    )
    new = GraphState(t, phi.reshape(metric.grid.shape), state.step + steps, state.rescaled)
    if status:
        msg = STATUS_MESSAGES[status]
        if status != 4:
            msg += f" at node {_node(metric, bad)}"
        err = NumericalFatal(f"{msg} (t = {t:.6g})")
        err.state = new
        raise err
    if not np.all(np.isfinite(new.phi)):
        err = NumericalFatal(f"non-finite phi after step (t = {t:.6g})")
        err.state = new
        raise err
    return new


def step(state: GraphState, dt: float, metric: MetricField, method: str = "rk4", lay=None) -> GraphState:
    """One Runge-Kutta step of size ``dt``."""
    return advance(state, state.t + dt, metric, lay=lay, method=method, dt_fixed=dt, max_steps=1)


def rescale(state: GraphState, geo: GraphGeometry, metric: MetricField) -> RescaledView:
    n = metric.n
    s = math.exp(-state.t / n)
    return RescaledView(
        t=state.t,
        u=geo.u * s,
        phi=geo.phi - state.t / n,
        g=geo.g * s**2,
        weingarten=geo.weingarten / s,
        H=geo.H / s,
        sqrt_det=np.sqrt(np.abs(np.linalg.det(np.moveaxis(geo.g * s**2, (0, 1), (-2, -1))))),
    )


def rescaled_residual(prev: GraphState, nxt: GraphState, metric: MetricField, stencil=None) -> float:
    """max |phi~_t - 1/F + 1/n| from two nearby states (midpoint speed)."""
    n = metric.n
    dt = nxt.t - prev.t
    dres = ((nxt.phi - nxt.t / n) - (prev.phi - prev.t / n)) / dt
    mid = 0.5 * (prev.phi + nxt.phi)
    speed = rhs(mid, metric)
    return float(np.max(np.abs(dres - speed + 1.0 / n)))


def oracle_r_infinity(config: RunConfig, refinement: int = ORACLE_REFINEMENT) -> float:
    """r_inf from a quadrature of |M_0| at ``refinement`` x the run resolution."""
    nodes = tuple(refinement * k for k in config.discretization.nodes)
    grid = build_chart_grid(nodes, config.topology)
    metric = eval_metric(config.manifold.preset, config.manifold.params, grid)
    phi = initial_phi(config.initial.profile, config.initial.params, grid, config.manifold.preset)
    geo = graph_geometry(phi, metric, check_parabolic=False)
    return r_infinity(area(geo, metric), metric.exact_area, metric.n)


def target_times(t_start: float, t_end: float, *cadences: float) -> list[float]:
    """Sorted union of k * cadence in (t_start, t_end], plus t_end."""
    out = {t_end}
    for cad in cadences:
        if cad <= 0:
            continue
        k = math.floor(t_start / cad + 1e-9) + 1
        while k * cad < t_end - 1e-12:
            out.add(k * cad)
            k += 1
    times = sorted(x for x in out if x > t_start + 1e-12)
    merged = []
    for x in times:
        if merged and x - merged[-1] < 1e-12:
            continue
        merged.append(x)
    return merged


def _on_cadence(t: float, cadence: float, t_end: float) -> bool:
    if cadence <= 0:
        return abs(t - t_end) < 1e-12
    k = round(t / cadence)
    return abs(k * cadence - t) < 1e-12 or abs(t - t_end) < 1e-12


def initial_state(fs: FlowSetup) -> tuple[GraphState, GraphGeometry]:
    cfg = fs.config
    phi0 = initial_phi(cfg.initial.profile, cfg.initial.params, fs.grid, cfg.manifold.preset)
    try:
        geo = graph_geometry(phi0, fs.metric, fs.stencil)
    except (GraphError, ParabolicityError) as exc:
        raise InputError(f"invalid initial graph: {exc}") from None
    bad = np.argwhere(~(geo.H > 0))
    if bad.size:
        node = tuple(int(k) for k in bad[0])
        raise InputError(
            f"initial data needs strictly positive mean curvature (H0 = {geo.H[tuple(bad[0])]:.3e} at node {node})"
        )
    return GraphState(0.0, phi0, 0), geo


def build_baseline(fs: FlowSetup, geo0: GraphGeometry) -> Baseline:
    tol = fs.config.tolerances
    return make_baseline(
        geo0,
        fs.metric,
        tolerance=tolerance_for(fs.grid, tol.absolute, tol.discretization),
        warn_factor=tol.warn_factor,
        r_inf=oracle_r_infinity(fs.config),
    )


class _Outputs:
    def __init__(self, fs: FlowSetup, directory, keep_until=None):
        self.fs = fs
        self.dir = Path(directory) if directory is not None else None
        self.csv = None
        if self.dir is not None:
            try:
                self.dir.mkdir(parents=True, exist_ok=True)
                self.csv = io.DiagnosticsWriter(self.dir / "diagnostics.csv", keep_until=keep_until)
            except OSError as exc:
                raise InputError(f"cannot write to {self.dir}: {exc.strerror}") from None

    def record(self, rec):
        if self.csv is not None:
            self.csv.write(rec)

    def checkpoint(self, state: GraphState, baseline: Baseline, tag: str = ""):
        if self.dir is None:
            return None
        name = f"checkpoint_t{state.t:.6f}{tag}.wflw"
        path = io.write_checkpoint(
            self.dir / name, state.t, state.step, state.phi, self.fs.grid_hash,
            {"mu_run": baseline.mu_run, "F_sup_run": baseline.F_sup_run},
        )
        if self.fs.config.output.snapshots:
            io.write_snapshot(
                self.dir / f"phi_t{state.t:.6f}{tag}.snap", state.phi, field="phi", t=state.t,
                preset=self.fs.metric.label(),
            )
        return path


def _sample(fs: FlowSetup, state: GraphState, baseline: Baseline) -> tuple[DiagnosticsRecord, list]:
    try:
        geo = graph_geometry(state.phi, fs.metric, fs.stencil)
    except ParabolicityError as exc:
        raise NumericalFatal(str(exc)) from None
    except GraphError as exc:
        raise NumericalFatal(str(exc)) from None
    rec, breaches = monitors(state.t, state.step, geo, fs.metric, baseline)
    if fs.config.output.crosschecks:
        xc = crosscheck_window(fs, state)
        if xc is not None:
            rec.xc_metric = xc["metric"]
            rec.xc_inverse_metric = xc["inverse_metric"]
            rec.xc_inverse_metric_alt = xc["inverse_metric_alt"]
            rec.xc_measure = xc["measure"]
            rec.xc_rescaled_measure = xc["rescaled_measure"]
            rec.xc_mean_curvature = xc["mean_curvature"]
            rec.xc_dt = xc["dt"]
    return rec, breaches


def crosscheck_window(fs: FlowSetup, state: GraphState, steps: int = CROSSCHECK_STEPS):
    """Evolution cross-checks on a forward side window (t, t + d, t + 2d).

    The window is integrated on a copy with a fixed step, so it never
    perturbs the main trajectory.
    """
    cfg = fs.config
    try:
        dt = stable_dt(state.phi, fs.metric, cfg.stepping.c_cfl, fs.layout)
        delta = steps * dt
        kw = dict(lay=fs.layout, method=cfg.stepping.integrator, dt_fixed=dt, max_steps=steps + 1)
        mid = advance(state, state.t + delta, fs.metric, **kw)
        end = advance(mid, state.t + 2 * delta, fs.metric, **kw)
    except NumericalFatal:
        return None
    return evolution_crosschecks((state.phi, mid.phi, end.phi), delta, mid.t, fs.metric, fs.stencil)


def _drive(fs: FlowSetup, state: GraphState, baseline: Baseline, out: _Outputs,
           records: list, stop_at: float | None = None, observer=None) -> Trajectory:
    cfg = fs.config
    st = cfg.stepping
    oc = cfg.output
    t_end = st.t_end
    horizon = min(t_end, stop_at) if stop_at is not None else t_end
    checkpoints = []
    all_breaches = []
    upwind = cfg.discretization.stencil == "upwind1"
    for target in target_times(state.t, horizon, oc.diagnostics_every, oc.checkpoint_every):
        try:
            state = advance(
                state, target, fs.metric, lay=fs.layout, c_cfl=st.c_cfl, method=st.integrator,
                dt_fixed=st.dt_fixed, max_steps=max(st.max_steps - state.step, 0), upwind=upwind,
            )
        except NumericalFatal as exc:
            last = getattr(exc, "state", state)
            ck = out.checkpoint(last, baseline, "_fatal")
            if ck:
                checkpoints.append(ck)
            return Trajectory(records, checkpoints, "numerical-fatal", last, baseline, str(exc), all_breaches)
        if _on_cadence(target, oc.diagnostics_every, t_end):
            try:
                rec, breaches = _sample(fs, state, baseline)
            except NumericalFatal as exc:
                ck = out.checkpoint(state, baseline, "_fatal")
                if ck:
                    checkpoints.append(ck)
                return Trajectory(records, checkpoints, "numerical-fatal", state, baseline, str(exc), all_breaches)
            records.append(rec)
            out.record(rec)
            if observer is not None:
                observer(state, rec)
            all_breaches.extend(breaches)
            for b in breaches:
                log.warning("t=%.4f %s breach %.3e (tol %.3e): %s", b.t, b.monitor, b.gap, b.tolerance, b.severity)
            if rec.worst == "fatal":
                ck = out.checkpoint(state, baseline, "_fatal")
                if ck:
                    checkpoints.append(ck)
                names = ", ".join(b.monitor for b in breaches if b.severity == "fatal")
                return Trajectory(records, checkpoints, "fatal-breach", state, baseline,
                                  f"fatal monitor breach at t={state.t:.6g}: {names}", all_breaches)
        if _on_cadence(target, oc.checkpoint_every, t_end):
            ck = out.checkpoint(state, baseline)
            if ck:
                checkpoints.append(ck)
    status = "reached-t_end" if abs(state.t - t_end) < 1e-12 else "user-stop"
    return Trajectory(records, checkpoints, status, state, baseline, "", all_breaches)


def run(config: RunConfig, directory=None, stop_at: float | None = None, observer=None) -> Trajectory:
    """Integrate from the configured initial data to t_end (or ``stop_at``).

    ``observer(state, record)`` is called after every diagnostics sample.
    """
    fs = setup(config)
    state, geo0 = initial_state(fs)
    baseline = build_baseline(fs, geo0)
    out = _Outputs(fs, directory if directory is not None else config.output.directory)
    records = []
    rec, _ = _sample(fs, state, baseline)
    records.append(rec)
    out.record(rec)
    if observer is not None:
        observer(state, rec)
    return _drive(fs, state, baseline, out, records, stop_at, observer)


def resume(checkpoint_path, config: RunConfig, directory=None, stop_at: float | None = None,
           observer=None) -> Trajectory:
    """Continue from a checkpoint written by ``run`` with the same config."""
    fs = setup(config)
    ck = io.read_checkpoint(checkpoint_path, expected_hash=fs.grid_hash)
    if ck.phi.size != fs.grid.size:
        raise io.CheckpointError("checkpoint/config mismatch (node count differs)")
    _, geo0 = initial_state(fs)
    baseline = build_baseline(fs, geo0)
    for key in ("mu_run", "F_sup_run"):
        if key in ck.trailer and math.isfinite(ck.trailer[key]):
            setattr(baseline, key, ck.trailer[key])
    state = GraphState(ck.t, ck.phi.reshape(fs.grid.shape), ck.steps)
    out = _Outputs(fs, directory if directory is not None else config.output.directory, keep_until=ck.t)
    return _drive(fs, state, baseline, out, [], stop_at, observer)


def raise_for_status(traj: Trajectory):
    if traj.status == "fatal-breach":
        raise MonitorBreach(traj.message)
    if traj.status == "numerical-fatal":
        raise NumericalFatal(traj.message)
