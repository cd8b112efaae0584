"""Scenario files for the command line runner.

A scenario is a YAML mapping::

    name: cos-benchmark          # optional label
    kind: HopfLax1D              # HopfLax1D | LocalModel | FiniteMinFamily | A3 | ConvergenceStudy
    potential: {...}             # kind-specific, see below
    time: {t0: 0.0, T: 2.0, step: 0.001}
    particles: [1.0, 2.0]        # starting points; scalars in 1D, [x, y] in the plane
    nu_list: [0.1, 0.05, 0.01]   # ConvergenceStudy only: strictly decreasing, positive
    grid_points: 512             # ConvergenceStudy only (optional)
    outputs:
      - {kind: csv}
      - {kind: svg, times: [1.0]}
      - {kind: report}

Potential sections:

* ``HopfLax1D`` and ``ConvergenceStudy``: ``fourier`` (list of
  ``{k, cos, sin}`` terms), optional ``period`` (default ``2 pi``) and
  ``constant``.
* ``LocalModel``: ``momenta`` (list of points), optional ``U_star``,
  ``x_star``, ``t_star``, ``phi_star``.
* ``FiniteMinFamily``: ``branches``, each ``{type: affine, momentum, offset}``
  or ``{type: quadratic, matrix, center, offset, t_ref}``; optional ``U_star``.
* ``A3``: ``A``, ``B``, ``C``, ``alpha``, ``beta``, ``gamma``, ``p_star`` and
  optional ``U_star``, ``x_star``, ``t_star``, ``phi_star``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

__all__ = [
    "KINDS",
    "ConfigError",
    "OutputSpec",
    "ScenarioConfig",
    "TimeSpec",
    "dump_config",
    "load_config",
    "parse_config",
]

KINDS = ("HopfLax1D", "LocalModel", "FiniteMinFamily", "A3", "ConvergenceStudy")
OUTPUT_KINDS = ("csv", "svg", "report")


class ConfigError(ValueError):
    """Invalid scenario; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class TimeSpec:
    t0: float
    T: float
    step: float


@dataclass(frozen=True)
class OutputSpec:
    kind: str
    times: tuple = ()


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    potential: dict
    time: TimeSpec
    particles: tuple = ()
    nu_list: tuple | None = None
    outputs: tuple = (OutputSpec("csv"), OutputSpec("report"))
    name: str = ""
    grid_points: int = 512

    @property
    def dim(self) -> int:
        p = self.potential
        if self.kind in ("HopfLax1D", "ConvergenceStudy"):
            return 1
        if self.kind == "LocalModel":
            return len(p["momenta"][0])
        if self.kind == "FiniteMinFamily":
            b = p["branches"][0]
            return len(b["momentum"] if b["type"] == "affine" else b["center"])
        return len(p["p_star"])

    def to_dict(self) -> dict:
        out: dict = {}
        if self.name:
            out["name"] = self.name
        out["kind"] = self.kind
        out["potential"] = self.potential
        out["time"] = {"t0": self.time.t0, "T": self.time.T, "step": self.time.step}
        out["particles"] = [list(p) if len(p) > 1 else p[0] for p in self.particles]
        if self.nu_list is not None:
            out["nu_list"] = list(self.nu_list)
        if self.kind == "ConvergenceStudy":
            out["grid_points"] = self.grid_points
        out["outputs"] = [{"kind": o.kind, "times": list(o.times)} if o.kind == "svg" else {"kind": o.kind}
                          for o in self.outputs]
        return out


# ---------------------------------------------------------------------------
# field readers
# ---------------------------------------------------------------------------


def _num(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    return v


def _vec(v, path: str, n: int | None = None) -> list:
    if not isinstance(v, list):
        raise ConfigError(path, f"expected a list of numbers, got {v!r}")
    out = [_num(x, f"{path}[{i}]") for i, x in enumerate(v)]
    if n is not None and len(out) != n:
        raise ConfigError(path, f"expected {n} numbers, got {len(out)}")
    if not out:
        raise ConfigError(path, "must not be empty")
    return out


def _mat(v, path: str, rows: int | None = None, cols: int | None = None) -> list:
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a nonempty list of rows")
    out = [_vec(r, f"{path}[{i}]", cols) for i, r in enumerate(v)]
    if rows is not None and len(out) != rows:
        raise ConfigError(path, f"expected {rows} rows, got {len(out)}")
    widths = {len(r) for r in out}
    if len(widths) != 1:
        raise ConfigError(path, "rows have different lengths")
    return out


def _mapping(v, path: str) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(path, f"expected a mapping, got {type(v).__name__}")
    return v


def _only(d: dict, allowed: set, path: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown field")


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}" if path else key, "required field is missing")
    return d[key]


def _opt_num(d: dict, key: str, path: str, default: float) -> float:
    return _num(d[key], f"{path}.{key}") if key in d else default


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


def _fourier_potential(p: dict, path: str) -> dict:
    _only(p, {"fourier", "period", "constant"}, path)
    terms = _require(p, "fourier", path)
    if not isinstance(terms, list):
        raise ConfigError(f"{path}.fourier", "expected a list of terms")
    out_terms = []
    for i, t in enumerate(terms):
        tp = f"{path}.fourier[{i}]"
        t = _mapping(t, tp)
        _only(t, {"k", "cos", "sin"}, tp)
        k = _require(t, "k", tp)
        if isinstance(k, list):
            if len(k) != 1:
                raise ConfigError(f"{tp}.k", "one-dimensional potentials take a single wavenumber")
            k = k[0]
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise ConfigError(f"{tp}.k", "wavenumber must be a positive integer")
        out_terms.append({"k": int(k), "cos": _opt_num(t, "cos", tp, 0.0), "sin": _opt_num(t, "sin", tp, 0.0)})
    period = _opt_num(p, "period", path, 2 * math.pi)
    if period <= 0:
        raise ConfigError(f"{path}.period", "must be positive")
    return {"fourier": out_terms, "period": period, "constant": _opt_num(p, "constant", path, 0.0)}


def _local_potential(p: dict, path: str) -> dict:
    _only(p, {"momenta", "U_star", "x_star", "t_star", "phi_star"}, path)
    momenta = _mat(_require(p, "momenta", path), f"{path}.momenta")
    d = len(momenta[0])
    xs = _vec(p["x_star"], f"{path}.x_star", d) if "x_star" in p else [0.0] * d
    return {"momenta": momenta, "U_star": _opt_num(p, "U_star", path, 0.0), "x_star": xs,
            "t_star": _opt_num(p, "t_star", path, 0.0), "phi_star": _opt_num(p, "phi_star", path, 0.0)}


def _family_potential(p: dict, path: str) -> dict:
    _only(p, {"branches", "U_star"}, path)
    branches = _require(p, "branches", path)
    if not isinstance(branches, list) or not branches:
        raise ConfigError(f"{path}.branches", "expected a nonempty list")
    out, dims = [], set()
    for i, b in enumerate(branches):
        bp = f"{path}.branches[{i}]"
        b = _mapping(b, bp)
        typ = _require(b, "type", bp)
        if typ == "affine":
            _only(b, {"type", "momentum", "offset"}, bp)
            m = _vec(_require(b, "momentum", bp), f"{bp}.momentum")
            out.append({"type": "affine", "momentum": m, "offset": _opt_num(b, "offset", bp, 0.0)})
            dims.add(len(m))
        elif typ == "quadratic":
            _only(b, {"type", "matrix", "center", "offset", "t_ref"}, bp)
            c = _vec(_require(b, "center", bp), f"{bp}.center")
            A = _mat(_require(b, "matrix", bp), f"{bp}.matrix", len(c), len(c))
            out.append({"type": "quadratic", "matrix": A, "center": c,
                        "offset": _opt_num(b, "offset", bp, 0.0), "t_ref": _opt_num(b, "t_ref", bp, 0.0)})
            dims.add(len(c))
        else:
            raise ConfigError(f"{bp}.type", f"expected 'affine' or 'quadratic', got {typ!r}")
        if len(dims) > 1:
            raise ConfigError(bp, "branches have different dimensions")
    return {"branches": out, "U_star": _opt_num(p, "U_star", path, 0.0)}


def _a3_potential(p: dict, path: str) -> dict:
    _only(p, {"A", "B", "C", "alpha", "beta", "gamma", "p_star", "U_star", "x_star", "t_star", "phi_star"}, path)
    ps = _vec(_require(p, "p_star", path), f"{path}.p_star")
    d = len(ps)
    B = _vec(_require(p, "B", path), f"{path}.B")
    k = len(B)
    out = {
        "A": _num(_require(p, "A", path), f"{path}.A"),
        "B": B,
        "C": _mat(_require(p, "C", path), f"{path}.C", k, k),
        "alpha": _vec(_require(p, "alpha", path), f"{path}.alpha", d + 1),
        "beta": _vec(_require(p, "beta", path), f"{path}.beta", d + 1),
        "gamma": _mat(_require(p, "gamma", path), f"{path}.gamma", k, d + 1),
        "p_star": ps,
        "U_star": _opt_num(p, "U_star", path, 0.0),
        "x_star": _vec(p["x_star"], f"{path}.x_star", d) if "x_star" in p else [0.0] * d,
        "t_star": _opt_num(p, "t_star", path, 0.0),
        "phi_star": _opt_num(p, "phi_star", path, 0.0),
    }
    return out


_POTENTIALS = {
    "HopfLax1D": _fourier_potential,
    "ConvergenceStudy": _fourier_potential,
    "LocalModel": _local_potential,
    "FiniteMinFamily": _family_potential,
    "A3": _a3_potential,
}


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------


def parse_config(data) -> ScenarioConfig:
    """Validate a decoded YAML document."""
    data = _mapping(data, "")
    _only(data, {"name", "kind", "potential", "time", "particles", "nu_list", "outputs", "grid_points"}, "")
    kind = _require(data, "kind", "")
    if kind not in KINDS:
        raise ConfigError("kind", f"expected one of {', '.join(KINDS)}, got {kind!r}")
    name = data.get("name", "")
    if not isinstance(name, str):
        raise ConfigError("name", "expected a string")
    potential = _POTENTIALS[kind](_mapping(_require(data, "potential", ""), "potential"), "potential")

    tm = _mapping(_require(data, "time", ""), "time")
    _only(tm, {"t0", "T", "step"}, "time")
    t0 = _opt_num(tm, "t0", "time", 0.0)
    T = _num(_require(tm, "T", "time"), "time.T")
    step = _num(_require(tm, "step", "time"), "time.step")
    if not step > 0:
        raise ConfigError("time.step", "must be positive")
    if not T >= t0:
        raise ConfigError("time.T", "must not precede time.t0")

    dim = {"LocalModel": lambda: len(potential["momenta"][0]),
           "A3": lambda: len(potential["p_star"]),
           "FiniteMinFamily": lambda: len(potential["branches"][0].get("momentum")
                                          or potential["branches"][0]["center"])}.get(kind, lambda: 1)()
    parts = data.get("particles", [])
    if not isinstance(parts, list):
        raise ConfigError("particles", "expected a list")
    particles = []
    for i, x in enumerate(parts):
        pp = f"particles[{i}]"
        v = [_num(x, pp)] if not isinstance(x, list) else _vec(x, pp)
        if len(v) != dim:
            raise ConfigError(pp, f"expected a point of dimension {dim}")
        particles.append(tuple(v))

    nu_list = None
    if "nu_list" in data:
        nus = _vec(data["nu_list"], "nu_list")
        for i, v in enumerate(nus):
            if not v > 0:
                raise ConfigError(f"nu_list[{i}]", "viscosities must be positive")
            if i and not v < nus[i - 1]:
                raise ConfigError(f"nu_list[{i}]", "viscosities must be strictly decreasing")
        nu_list = tuple(nus)
    if kind == "ConvergenceStudy" and nu_list is None:
        raise ConfigError("nu_list", "required field is missing")
    if kind != "ConvergenceStudy" and nu_list is not None:
        raise ConfigError("nu_list", f"not used by kind {kind}")
    grid_points = data.get("grid_points", 512)
    if isinstance(grid_points, bool) or not isinstance(grid_points, int) or grid_points < 16:
        raise ConfigError("grid_points", "expected an integer >= 16")

    outs = data.get("outputs", [{"kind": "csv"}, {"kind": "report"}])
    if not isinstance(outs, list):
        raise ConfigError("outputs", "expected a list")
    outputs = []
    for i, o in enumerate(outs):
        op = f"outputs[{i}]"
        o = _mapping(o, op)
        ok = _require(o, "kind", op)
        if ok not in OUTPUT_KINDS:
            raise ConfigError(f"{op}.kind", f"expected one of {', '.join(OUTPUT_KINDS)}, got {ok!r}")
        if ok == "svg":
            _only(o, {"kind", "times"}, op)
            times = _vec(_require(o, "times", op), f"{op}.times")
            planar = kind == "LocalModel" or (kind == "FiniteMinFamily"
                                              and all(b["type"] == "affine" for b in potential["branches"]))
            if not planar or dim != 2:
                raise ConfigError(op, "shock pictures need a planar LocalModel or affine FiniteMinFamily")
            outputs.append(OutputSpec("svg", tuple(times)))
        else:
            _only(o, {"kind"}, op)
            outputs.append(OutputSpec(ok))
    return ScenarioConfig(kind, potential, TimeSpec(t0, T, step), tuple(particles), nu_list,
                          tuple(outputs), name, int(grid_points))


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"not valid YAML: {exc}") from None
    return parse_config(data)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def build_model(cfg: ScenarioConfig):
    """Potential model described by a scenario."""
    from .convex_core import MomentumSet
    from .fourier import FourierSeries
    from .limit_potential import (
        A3EndpointModel,
        AffineBranch,
        FiniteMinFamily,
        HopfLaxPotential,
        LocalLinearModel,
        QuadraticBranch,
    )

    p = cfg.potential
    if cfg.kind in ("HopfLax1D", "ConvergenceStudy"):
        return HopfLaxPotential(initial_potential(cfg))
    if cfg.kind == "LocalModel":
        return LocalLinearModel(MomentumSet(np.array(p["momenta"])), p["U_star"], p["x_star"], p["t_star"],
                                p["phi_star"])
    if cfg.kind == "FiniteMinFamily":
        members = []
        for b in p["branches"]:
            if b["type"] == "affine":
                members.append(AffineBranch(b["momentum"], b["offset"]))
            else:
                members.append(QuadraticBranch(b["matrix"], b["center"], b["offset"], b["t_ref"]))
        return FiniteMinFamily(tuple(members), p["U_star"])
    return A3EndpointModel(p["A"], p["B"], p["C"], p["alpha"], p["beta"], p["gamma"], p["p_star"],
                           p["U_star"], p["x_star"], p["t_star"], p["phi_star"])


def initial_potential(cfg: ScenarioConfig):
    from .fourier import FourierSeries

    p = cfg.potential
    terms = [{"k": [t["k"]], "cos": t["cos"], "sin": t["sin"]} for t in p["fourier"]]
    return FourierSeries.from_terms(terms, [p["period"]], p["constant"])
