"""Command-line entry points: run, resume, verify, report.

Exit codes: 0 ok, 2 config/input error, 3 monitor breach, 4 numerical
fatal, 5 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from . import __version__, flow, io
from .config import parse_config_text, ConfigError
from .diagnostics import asymptotics_report, fit_rate
from .errors import InputError, WarpflowError
from .identities import POLE_CAP, THRESHOLDS, seed_from_env, verify_preset

log = logging.getLogger("warpflow")

REPORT_SERIES = (
    "area_ratio",
    "rescaled_area",
    "u_resc_min",
    "u_resc_max",
    "H_resc_min",
    "H_resc_max",
    "grad_sq_max",
    "du_resc_max",
    "d2u_resc_max",
    "u_gap",
    "g_gap",
    "h_gap",
    "gradient_decay_gap",
)
RATE_SERIES = ("du_resc_max", "d2u_resc_max", "u_gap", "g_gap", "h_gap")


def _load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg, defaulted = parse_config_text(text)
    for key in defaulted:
        print(f"default: {key}")
    return cfg


def _print_trajectory(traj: flow.Trajectory):
    last = traj.records[-1] if traj.records else None
    print(f"status: {traj.status}  t = {traj.state.t:.6g}  steps = {traj.state.step}")
    if traj.message:
        print(f"reason: {traj.message}")
    if last is not None:
        print(f"condition: {last.condition}")
        print(
            f"area ratio {last.area_ratio:.8g} (e^t = {math.exp(last.t):.8g}); "
            f"u~ in [{last.u_resc_min:.8g}, {last.u_resc_max:.8g}]; r_inf = {last.r_inf:.8g}"
        )
        print(f"lambda_cert = {last.lambda_cert:.6g} (conservative running-extrema reading)")
    for ck in traj.checkpoints[-1:]:
        print(f"checkpoint: {ck}")


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    traj = flow.run(cfg, directory=args.output)
    _print_trajectory(traj)
    return traj.exit_code


def cmd_resume(args) -> int:
    cfg = _load_config(args.config)
    traj = flow.resume(args.checkpoint, cfg, directory=args.output)
    _print_trajectory(traj)
    return traj.exit_code


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    preset = cfg.manifold.preset
    scheme = cfg.discretization.stencil
    seed = seed_from_env()
    studies, umbilic = verify_preset(preset, cfg.manifold.params, seed=seed, scheme=scheme, coarse=args.coarse)
    failing = []
    rows = []
    print(f"identity oracle: preset {preset}, stencil {scheme}, seed {seed}, pole cap {POLE_CAP:.4f}")
    for study, umb in zip(studies, umbilic):
        order = "-" if study.order is None else f"{study.order:.3f}"
        print(
            f"  {study.identity:15s} {study.status:12s} order {order:>6s} "
            f"(>= {THRESHOLDS[study.identity]})  umbilic {umb.status} {umb.max_residual:.2e}"
        )
        if not study.passed:
            failing.append(study.identity)
        elif umb.status == "failed":
            failing.append(f"{study.identity} (umbilic)")
        for rep in study.reports:
            rows.append([study.identity, preset, scheme, rep.resolution, "%.17g" % rep.h,
                         "%.17g" % rep.max_residual, "%.17g" % rep.mean_residual,
                         "" if study.order is None else "%.17g" % study.order, study.status])
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["identity", "preset", "stencil", "resolution", "h", "max_residual",
                        "mean_residual", "order", "status"])
            w.writerows(rows)
    if failing:
        print("verification failed: " + ", ".join(failing))
        return 5
    print("verification passed")
    return 0


def _summary(records) -> list[str]:
    rep = asymptotics_report(records)
    lines = [f"t_final {rep['t_final']:.6g}  r_inf {rep['r_inf']:.10g}  r_inf_est {rep['r_inf_est']:.10g}  "
             f"rel err {rep['r_inf_rel_error']:.3e}"]
    for name, g in rep["gaps"].items():
        lines.append(f"{name:8s} initial {g['initial']:.4e} final {g['final']:.4e} "
                     f"reduction {g['reduction']:.4g} rate {g['rate']:.4f} (R2 {g['r_squared']:.4f})")
    t = [r.t for r in records]
    for name in RATE_SERIES:
        try:
            fit = fit_rate(t, [getattr(r, name) for r in records], name)
            note = f" [{fit.note}]" if fit.note else ""
            lines.append(f"fit {name:12s} rate {fit.rate:.5f} R2 {fit.r_squared:.4f} "
                         f"over [{fit.t_start:.3g}, {fit.t_end:.3g}] n={fit.samples}{note}")
        except ValueError as exc:
            lines.append(f"fit {name:12s} unavailable: {exc}")
    last = records[-1]
    lines.append(f"condition {last.condition}; worst breach {max((r.worst for r in records), key=_sev)}")
    return lines


def _sev(w):
    return {"ok": 0, "warn": 1, "fatal": 2}.get(w, 0)


def cmd_report(args) -> int:
    runs = [io.read_diagnostics(p) for p in args.csv]
    for p, recs in zip(args.csv, runs):
        if not recs:
            raise io.SchemaError(f"{p}: no diagnostics rows")
    out = Path(args.output)
    text = []
    for k, (p, recs) in enumerate(zip(args.csv, runs)):
        sub = out if len(runs) == 1 else out / f"run{k}"
        io.write_series(sub, recs, REPORT_SERIES)
        text.append(f"== {p}")
        text.extend(_summary(recs))
    if len(runs) > 1:
        text.append("== comparison")
        text.append("run  t_final  area_ratio_err  u_gap  g_gap  h_gap  r_inf_est")
        for k, recs in enumerate(runs):
            r = recs[-1]
            text.append(f"{k}  {r.t:.4g}  {r.area_law_error:.3e}  {r.u_gap:.3e}  {r.g_gap:.3e}  "
                        f"{r.h_gap:.3e}  {r.r_inf_est:.8g}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.txt").write_text("\n".join(text) + "\n")
    print("\n".join(text))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="warpflow", description="Inverse mean curvature flow of warped graphs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate a configured run")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides the config)")
    r.set_defaults(func=cmd_run)

    r = sub.add_parser("resume", help="continue from a checkpoint")
    r.add_argument("config")
    r.add_argument("checkpoint")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_resume)

    r = sub.add_parser("verify", help="identity residual refinement study")
    r.add_argument("config")
    r.add_argument("--csv", help="write one row per identity and resolution")
    r.add_argument("--coarse", type=int, default=None, help="coarsest grid size")
    r.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="series files and summary from diagnostics CSVs")
    r.add_argument("csv", nargs="+")
    r.add_argument("-o", "--output", default="report")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except WarpflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
