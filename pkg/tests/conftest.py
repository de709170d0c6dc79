import numpy as np
import pytest

from warpflow.basegeom import eval_metric
from warpflow.config import parse_config_text
from warpflow.grid import build_chart_grid


def sphere_grid(n0=32):
    return build_chart_grid((n0, 2 * n0), ("pole", "periodic"))


def make_metric(preset, nodes, params=None):
    if preset in ("round-sphere", "perturbed-sphere"):
        grid = build_chart_grid(nodes, ("pole", "periodic"))
    else:
        grid = build_chart_grid(nodes)
    return eval_metric(preset, params, grid)


def config_text(preset="round-sphere", initial='profile = "cosine"\ncoefficients = [1.0, 0.2]',
                nodes=(16, 32), t_end=1.0, directory="out", stepping="", output="", manifold=""):
    return f"""[manifold]
preset = "{preset}"
{manifold}
[initial]
{initial}

[discretization]
nodes = [{", ".join(str(k) for k in nodes)}]

[stepping]
t_end = {t_end}
{stepping}
[output]
directory = "{directory}"
{output}
"""


def make_config(tmp_path=None, **kw):
    if tmp_path is not None:
        kw.setdefault("directory", str(tmp_path / "out"))
    cfg, _ = parse_config_text(config_text(**kw))
    return cfg


@pytest.fixture
def sphere32():
    return make_metric("round-sphere", (32, 64))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


# ---- acceptance verdict lines ---------------------------------------------

_VERDICTS = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        key = props["criterion"]
        entry = _VERDICTS.setdefault(key, {"title": props["title"], "ok": True, "details": []})
        entry["ok"] &= report.passed
        entry["details"].append(props.get("detail") or ("setup failed" if report.when == "setup" else ""))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_VERDICTS):
        v = _VERDICTS[key]
        mark = "PASS" if v["ok"] else "FAIL"
        detail = "; ".join(d for d in v["details"] if d)
        terminalreporter.write_line(f"criterion {key}: {mark}  {v['title']}  [{detail}]")
