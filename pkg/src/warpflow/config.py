"""Run configuration: a sectioned TOML file validated against a fixed schema.

Units: times are flow-time units (the unrescaled flow expands areas by e^t);
``radius`` and ``r0`` are lengths in the ambient; angles are radians.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .basegeom import PRESETS
from .errors import InputError
from .grid import SCHEMES
from .kernels import METHODS

PROFILES = ("constant", "cosine", "ellipse", "random")
_REQUIRED = object()


class ConfigError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line else ""
        super().__init__(where + message)


@dataclass
class ManifoldSpec:
    preset: str
    params: dict = field(default_factory=dict)


@dataclass
class InitialSpec:
    profile: str
    params: dict = field(default_factory=dict)


@dataclass
class DiscretizationSpec:
    nodes: tuple
    stencil: str = "centered"


@dataclass
class SteppingSpec:
    t_end: float
    c_cfl: float = 0.5
    integrator: str = "rk4"
    dt_fixed: float = 0.0
    max_steps: int = 100_000_000


@dataclass
class OutputSpec:
    directory: str = "run_output"
    diagnostics_every: float = 0.25
    checkpoint_every: float = 1.0
    snapshots: bool = True
    crosschecks: bool = True


@dataclass
class ToleranceSpec:
    absolute: float = 1e-6
    discretization: float = 10.0
    warn_factor: float = 10.0


@dataclass
class RunConfig:
    manifold: ManifoldSpec
    initial: InitialSpec
    discretization: DiscretizationSpec
    stepping: SteppingSpec
    output: OutputSpec = field(default_factory=OutputSpec)
    tolerances: ToleranceSpec = field(default_factory=ToleranceSpec)

    @property
    def topology(self) -> tuple:
        if self.manifold.preset in ("round-sphere", "perturbed-sphere"):
            return ("pole", "periodic")
        return ("periodic",) * len(self.discretization.nodes)


# key -> (type, default)
_SCHEMA = {
    "manifold": {
        "preset": (str, _REQUIRED),
        "radius": (float, None),
        "epsilon": (float, None),
        "mode": (int, None),
    },
    "initial": {
        "profile": (str, _REQUIRED),
        "r0": (float, None),
        "coefficients": (list, None),
        "axes": (list, None),
        "seed": (int, None),
        "amplitude": (float, None),
    },
    "discretization": {
        "nodes": (list, _REQUIRED),
        "stencil": (str, "centered"),
    },
    "stepping": {
        "t_end": (float, _REQUIRED),
        "c_cfl": (float, 0.5),
        "integrator": (str, "rk4"),
        "dt_fixed": (float, 0.0),
        "max_steps": (int, 100_000_000),
    },
    "output": {
        "directory": (str, "run_output"),
        "diagnostics_every": (float, 0.25),
        "checkpoint_every": (float, 1.0),
        "snapshots": (bool, True),
        "crosschecks": (bool, True),
    },
    "tolerances": {
        "absolute": (float, 1e-6),
        "discretization": (float, 10.0),
        "warn_factor": (float, 10.0),
    },
}
_REQUIRED_SECTIONS = ("manifold", "initial", "discretization", "stepping")
_PRESET_KEYS = {
    "circle": (),
    "flat-torus": (),
    "round-sphere": ("radius",),
    "perturbed-sphere": ("radius", "epsilon", "mode"),
}
_PROFILE_KEYS = {
    "constant": ("r0",),
    "cosine": ("coefficients",),
    "ellipse": ("axes",),
    "random": ("r0", "seed", "amplitude"),
}


def _locate(text: str, section: str, key: str | None = None) -> int | None:
    """Line number of ``[section]`` or of ``key`` inside it (1-based)."""
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]", line)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", line):
            return no
    return None


def _coerce(value, typ, section, key, text):
    line = _locate(text, section, key)
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number", line)
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{section}.{key} must be finite", line)
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer", line)
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{section}.{key} must be true or false", line)
        return value
    if not isinstance(value, typ):
        raise ConfigError(f"{section}.{key} must be a {typ.__name__}", line)
    return value


def parse_config_text(text: str) -> tuple[RunConfig, list[str]]:
    """Validate TOML text; returns the config and the list of defaulted keys."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}", getattr(exc, "lineno", None)) from None
    for section, body in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", _locate(text, section))
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table", _locate(text, section, section))
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}", _locate(text, section, key))
    for section in _REQUIRED_SECTIONS:
        if section not in raw:
            raise ConfigError(f"missing section [{section}]")

    values: dict[str, dict] = {}
    defaulted: list[str] = []
    for section, schema in _SCHEMA.items():
        body = raw.get(section, {})
        out = {}
        for key, (typ, default) in schema.items():
            if key in body:
                out[key] = _coerce(body[key], typ, section, key, text)
            elif default is _REQUIRED:
                raise ConfigError(f"missing key {section}.{key}", _locate(text, section))
            elif default is not None:
                out[key] = default
                defaulted.append(f"{section}.{key} = {_emit_value(default)}")
        values[section] = out

    def fail(section, key, message):
        raise ConfigError(message, _locate(text, section, key))

    man = values["manifold"]
    preset = man.pop("preset")
    if preset not in PRESETS:
        fail("manifold", "preset", f"unknown preset {preset!r} (expected one of {', '.join(PRESETS)})")
    for key in man:
        if key not in _PRESET_KEYS[preset]:
            fail("manifold", key, f"manifold.{key} does not apply to preset {preset}")
    if "radius" in man and not man["radius"] > 0:
        fail("manifold", "radius", "radius must be positive")

    ini = values["initial"]
    profile = ini.pop("profile")
    if profile not in PROFILES:
        fail("initial", "profile", f"unknown profile {profile!r} (expected one of {', '.join(PROFILES)})")
    for key in ini:
        if key not in _PROFILE_KEYS[profile]:
            fail("initial", key, f"initial.{key} does not apply to profile {profile}")
    if profile == "constant":
        ini.setdefault("r0", 1.0)
    if "r0" in ini and not ini["r0"] > 0:
        fail("initial", "r0", "r0 must be positive")
    if profile == "cosine":
        coeffs = ini.get("coefficients")
        if not coeffs or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in coeffs):
            fail("initial", "coefficients", "coefficients must be a non-empty list of numbers")
        ini["coefficients"] = [float(c) for c in coeffs]
    if profile == "ellipse":
        axes = ini.get("axes")
        if not axes or len(axes) != 2 or not all(isinstance(a, (int, float)) and a > 0 for a in axes):
            fail("initial", "axes", "axes must be two positive semi-axis lengths")
        ini["axes"] = [float(a) for a in axes]
    if profile == "random":
        ini.setdefault("r0", 1.0)
        ini.setdefault("seed", 0)
        ini.setdefault("amplitude", 0.1)

    disc = values["discretization"]
    nodes = disc["nodes"]
    if not nodes or not all(isinstance(k, int) and not isinstance(k, bool) for k in nodes):
        fail("discretization", "nodes", "nodes must be a list of integers")
    if disc["stencil"] not in SCHEMES:
        fail("discretization", "stencil", f"stencil must be one of {', '.join(SCHEMES)}")

    step = values["stepping"]
    if not step["t_end"] > 0:
        fail("stepping", "t_end", "t_end must be positive")
    if not 0 < step["c_cfl"] <= 1:
        fail("stepping", "c_cfl", "c_cfl out of (0,1]")
    if step["integrator"] not in METHODS:
        fail("stepping", "integrator", "integrator must be rk2 or rk4")
    if step["dt_fixed"] < 0:
        fail("stepping", "dt_fixed", "dt_fixed must be >= 0 (0 selects the stable step)")
    if step["max_steps"] < 1:
        fail("stepping", "max_steps", "max_steps must be positive")

    out = values["output"]
    for key in ("diagnostics_every", "checkpoint_every"):
        if out[key] < 0:
            fail("output", key, f"{key} must be >= 0")
    if not out["diagnostics_every"] > 0:
        fail("output", "diagnostics_every", "diagnostics_every must be positive")

    tol = values["tolerances"]
    for key in ("absolute", "discretization"):
        if tol[key] < 0:
            fail("tolerances", key, f"{key} must be >= 0")
    if not tol["warn_factor"] >= 1:
        fail("tolerances", "warn_factor", "warn_factor must be >= 1")

    cfg = RunConfig(
        manifold=ManifoldSpec(preset, man),
        initial=InitialSpec(profile, ini),
        discretization=DiscretizationSpec(tuple(nodes), disc["stencil"]),
        stepping=SteppingSpec(**step),
        output=OutputSpec(**out),
        tolerances=ToleranceSpec(**tol),
    )
    return cfg, defaulted


def parse_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg, _ = parse_config_text(text)
    return cfg


def _emit_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        if not any(c in text for c in ".en"):
            text += ".0"
        return text
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_emit_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialise {type(value).__name__}")


def emit_config(cfg: RunConfig) -> str:
    """TOML text that parses back to an equal RunConfig."""
    lines = ["[manifold]", f"preset = {_emit_value(cfg.manifold.preset)}"]
    lines += [f"{k} = {_emit_value(v)}" for k, v in sorted(cfg.manifold.params.items())]
    lines += ["", "[initial]", f"profile = {_emit_value(cfg.initial.profile)}"]
    lines += [f"{k} = {_emit_value(v)}" for k, v in sorted(cfg.initial.params.items())]
    lines += ["", "[discretization]"]
    lines += [f"{f.name} = {_emit_value(getattr(cfg.discretization, f.name))}" for f in fields(DiscretizationSpec)]
    for name in ("stepping", "output", "tolerances"):
        spec = getattr(cfg, name)
        lines += ["", f"[{name}]"]
        lines += [f"{f.name} = {_emit_value(getattr(spec, f.name))}" for f in fields(spec)]
    return "\n".join(lines) + "\n"
