import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from warpflow import io
from warpflow.diagnostics import DiagnosticsRecord
from warpflow.errors import InputError

HASH = bytes(range(32))

shapes = st.sampled_from([(8,), (8, 16), (3, 5)])
finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite)), finite)
def test_snapshot_round_trip_bit_identical(tmp_path_factory, values, t):
    p = tmp_path_factory.mktemp("snap") / "x.snap"
    io.write_snapshot(p, values, field="phi", t=t, preset="round-sphere")
    header, back = io.read_snapshot(p)
    assert back.tobytes() == values.tobytes()
    assert header["t"] == t or (t == 0 and header["t"] == 0)
    assert header["dims"] == list(values.shape) and header["preset"] == "round-sphere"


def test_snapshot_rejects_non_finite(tmp_path):
    with pytest.raises(ValueError):
        io.write_snapshot(tmp_path / "x", np.array([1.0, np.nan]), field="phi", t=0.0, preset="circle")


def test_snapshot_count_mismatch(tmp_path):
    p = io.write_snapshot(tmp_path / "x", np.ones(8), field="phi", t=0.0, preset="circle")
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(InputError, match="expected 8 values"):
        io.read_snapshot(p)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 8), elements=finite), finite, st.integers(0, 2**63 - 1))
def test_checkpoint_round_trip(tmp_path_factory, phi, t, steps):
    p = tmp_path_factory.mktemp("ck") / "c.wflw"
    io.write_checkpoint(p, t, steps, phi, HASH, {"mu_run": 0.5, "F_sup_run": 2.5})
    ck = io.read_checkpoint(p, HASH)
    assert ck.phi.tobytes() == phi.ravel().tobytes()
    assert (ck.steps, ck.trailer) == (steps, {"mu_run": 0.5, "F_sup_run": 2.5})
    assert ck.t == t or (math.isnan(ck.t) and math.isnan(t))


def test_checkpoint_layout(tmp_path):
    p = io.write_checkpoint(tmp_path / "c", 1.5, 7, np.arange(6.0), HASH)
    blob = p.read_bytes()
    assert blob[:4] == b"WFLW"
    assert blob[8:40] == HASH
    np.testing.assert_array_equal(np.frombuffer(blob[64:112], "<f8"), np.arange(6.0))
    assert blob[112:116] == b"TRLR"


@pytest.mark.parametrize(
    "mutate, pattern",
    [
        (lambda b: b"NOPE" + b[4:], "bad magic"),
        (lambda b: b[:4] + (9).to_bytes(4, "little") + b[8:], "version 9, this build reads version 1"),
        (lambda b: b[:80], "truncated"),
        (lambda b: b[:20], "truncated"),
    ],
)
def test_checkpoint_corruption(tmp_path, mutate, pattern):
    p = io.write_checkpoint(tmp_path / "c", 1.0, 1, np.ones(16), HASH)
    p.write_bytes(mutate(p.read_bytes()))
    with pytest.raises(io.CheckpointError, match=pattern):
        io.read_checkpoint(p, HASH)


def test_checkpoint_hash_mismatch(tmp_path):
    p = io.write_checkpoint(tmp_path / "c", 1.0, 1, np.ones(16), HASH)
    with pytest.raises(io.CheckpointError, match="checkpoint/config mismatch"):
        io.read_checkpoint(p, bytes(32))


def _record(t, **kw):
    base = {c: 0.0 for c in DiagnosticsRecord.columns()}
    base.update(t=t, step=int(t * 100), ricci_positive=True, condition="ok", breaches=0, worst="ok")
    base.update(kw)
    return DiagnosticsRecord(**base)


def test_csv_round_trip_and_header(tmp_path):
    p = tmp_path / "d.csv"
    w = io.DiagnosticsWriter(p)
    recs = [_record(0.1 * k, area=math.pi * k + 1 / 3, condition="Ric>0 violated (n=1); empirical only")
            for k in range(5)]
    for r in recs:
        w.write(r)
    header = p.read_text().splitlines()[0].split(",")
    assert header == ["schema_version"] + DiagnosticsRecord.columns()
    assert io.read_diagnostics(p) == recs


def test_csv_resume_trims_later_rows(tmp_path):
    p = tmp_path / "d.csv"
    w = io.DiagnosticsWriter(p)
    for k in range(5):
        w.write(_record(0.25 * k))
    io.DiagnosticsWriter(p, keep_until=0.5)
    assert [r.t for r in io.read_diagnostics(p)] == [0.0, 0.25, 0.5]


def test_csv_schema_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("")
    with pytest.raises(io.SchemaError, match="empty"):
        io.read_diagnostics(p)
    p.write_text("schema_version,t\n1.0,0\n")
    with pytest.raises(io.SchemaError, match="schema mismatch"):
        io.read_diagnostics(p)
    w = io.DiagnosticsWriter(p)
    w.write(_record(0.0))
    p.write_text(p.read_text().replace("\n1.0,", "\n2.0,"))
    with pytest.raises(io.SchemaError, match="schema version 2.0"):
        io.read_diagnostics(p)


def test_series_files(tmp_path):
    recs = [_record(0.5 * k, area=float(k)) for k in range(4)]
    (path,) = io.write_series(tmp_path, recs, ["area"])
    rows = np.loadtxt(path)
    np.testing.assert_array_equal(rows, [[0, 0], [0.5, 1], [1, 2], [1.5, 3]])
