import csv
import subprocess
import sys

import pytest

from warpflow import io
from warpflow.cli import main

from conftest import config_text


def _write(tmp_path, name="run.toml", **kw):
    kw.setdefault("directory", str(tmp_path / "out"))
    p = tmp_path / name
    p.write_text(config_text(**kw))
    return p


def test_run_exit_zero_with_one_row_per_cadence(tmp_path, capsys):
    cfg = _write(tmp_path, t_end=1.0, output="diagnostics_every = 0.125\ncrosschecks = false")
    assert main(["run", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "status: reached-t_end" in out
    assert "default: stepping.c_cfl = 0.5" in out
    rows = list(csv.reader(open(tmp_path / "out" / "diagnostics.csv")))
    assert len(rows) == 1 + 9
    assert (tmp_path / "out" / "checkpoint_t1.000000.wflw").exists()


def test_run_refuses_nonpositive_mean_curvature(tmp_path, capsys):
    cfg = _write(tmp_path, initial='profile = "cosine"\ncoefficients = [1.0, 0.95]')
    assert main(["run", str(cfg)]) == 2
    assert "strictly positive mean curvature" in capsys.readouterr().err
    assert not (tmp_path / "out" / "diagnostics.csv").exists()


def test_run_blowup_exit_and_checkpoint(tmp_path):
    cfg = _write(tmp_path, initial='profile = "random"\nseed = 3\namplitude = 0.1', stepping="dt_fixed = 0.01")
    assert main(["run", str(cfg)]) in (3, 4)
    assert list((tmp_path / "out").glob("*_fatal.wflw"))


def test_config_error_exit_two_with_line(tmp_path, capsys):
    cfg = _write(tmp_path, stepping="c_cfl = 1.5")
    assert main(["run", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "c_cfl out of (0,1]" in err and "line " in err


def test_missing_config_exit_two(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml")]) == 2


def test_resume_round_trip(tmp_path, capsys):
    cfg = _write(tmp_path, t_end=0.5, output="checkpoint_every = 0.25\ncrosschecks = false")
    assert main(["run", str(cfg)]) == 0
    ck = tmp_path / "out" / "checkpoint_t0.250000.wflw"
    assert main(["resume", str(cfg), str(ck), "-o", str(tmp_path / "out")]) == 0
    assert [r.t for r in io.read_diagnostics(tmp_path / "out" / "diagnostics.csv")] == [0.0, 0.25, 0.5]


def test_resume_mismatch_exit_two(tmp_path, capsys):
    cfg = _write(tmp_path, t_end=0.25, output="crosschecks = false")
    assert main(["run", str(cfg)]) == 0
    other = _write(tmp_path, name="other.toml", nodes=(12, 24))
    ck = tmp_path / "out" / "checkpoint_t0.250000.wflw"
    assert main(["resume", str(other), str(ck)]) == 2
    assert "checkpoint/config mismatch" in capsys.readouterr().err


def test_verify_sphere_passes(tmp_path, capsys):
    cfg = _write(tmp_path)
    table = tmp_path / "verify.csv"
    assert main(["verify", str(cfg), "--csv", str(table)]) == 0
    rows = list(csv.DictReader(open(table)))
    assert len(rows) == 5 * 3
    assert {r["status"] for r in rows} == {"ok"}


def test_verify_broken_stencil_exit_five(tmp_path, capsys):
    cfg = _write(tmp_path)
    cfg.write_text(cfg.read_text().replace("[discretization]", '[discretization]\nstencil = "upwind1"'))
    assert main(["verify", str(cfg)]) == 5
    out = capsys.readouterr().out
    assert "verification failed" in out and "gauss-formula" in out


def test_verify_circle_reports_degenerate(tmp_path, capsys):
    cfg = _write(tmp_path, preset="circle", nodes=(64,))
    assert main(["verify", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "gauss-equation" in out and "degenerate" in out


def test_verify_respects_seed(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("WARPFLOW_SEED", "99")
    cfg = _write(tmp_path, preset="circle", nodes=(64,))
    main(["verify", str(cfg)])
    assert "seed 99" in capsys.readouterr().out


def test_report_single_and_comparison(tmp_path, capsys):
    for k, t_end in enumerate((3.0, 3.0)):
        cfg = _write(tmp_path, name=f"r{k}.toml", t_end=t_end, directory=str(tmp_path / f"o{k}"),
                     nodes=(12 + 4 * k, 24 + 8 * k), output="diagnostics_every = 0.125\ncrosschecks = false")
        assert main(["run", str(cfg)]) == 0
    rep = tmp_path / "rep"
    assert main(["report", str(tmp_path / "o0" / "diagnostics.csv"), "-o", str(rep)]) == 0
    for name in ("area_ratio", "u_gap", "du_resc_max", "gradient_decay_gap"):
        assert (rep / f"series_{name}.dat").exists()
    summary = (rep / "summary.txt").read_text()
    assert "fit du_resc_max" in summary and "u_gap" in summary
    both = tmp_path / "both"
    assert main(["report", str(tmp_path / "o0" / "diagnostics.csv"), str(tmp_path / "o1" / "diagnostics.csv"),
                 "-o", str(both)]) == 0
    assert "== comparison" in (both / "summary.txt").read_text()
    assert (both / "run1" / "series_u_gap.dat").exists()


@pytest.mark.parametrize("content", ["", "schema_version,t\n1.0,0.0\n"])
def test_report_bad_csv_exit_two(tmp_path, content):
    p = tmp_path / "d.csv"
    p.write_text(content)
    assert main(["report", str(p), "-o", str(tmp_path / "r")]) == 2


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "warpflow.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("run", "verify", "resume", "report"):
        assert cmd in out.stdout


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2
