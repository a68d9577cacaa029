"""Scenario and sweep configuration.

Configs are YAML key trees.  Every dimensional quantity carries its unit in
the key: ``_per_lambda`` for rates and couplings, ``_inv_lambda`` for times.
A scenario looks like::

    name: fig2-gamma-0.001
    system:
      Gamma_1_per_lambda: 10
      Gamma_2_per_lambda: 10
      gamma_a_per_lambda: 0.001
      gamma_b_per_lambda: 0.001
      n_th: 0.5
      n_init: 2.0
      trap_nu_per_lambda: 300      # optional, full sideband model only
      lamb_dicke: 0.1              # scalar or {1x: .., 1y: .., 2x: .., 2y: ..}
    squeeze:                       # either this block ...
      r: 1.0
      phi: 0.0
      coupling_per_lambda: 1.0
    # drives:                      # ... or explicit couplings, [re, im]
    #   lambda_1x_per_lambda: [1.0, 0.0]
    space: {dim_a: 18, dim_b: 18}
    evolve:
      t_final_inv_lambda: 80
      n_samples: 161
      rel_tol: 1.0e-8
      abs_tol: 1.0e-10
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..dynamics import EvolveConfig
from ..errors import ConfigError, TMVSError
from ..hilbert import SpaceSpec
from ..model import DRIVE_KEYS, SystemParams
from ..states import DriveSet, SqueezeParams, solve_squeeze_params
from . import scenarios

REDUCERS = (
    "steady_duan_variance",
    "steady_mean_quanta_a",
    "steady_fidelity",
    "fitted_rate",
    "final_mean_quanta_a",
    "final_duan_variance",
    "final_fidelity",
)

AXIS_ALIASES = {
    "gamma": ("system", ("gamma_a_per_lambda", "gamma_b_per_lambda")),
    "gamma_per_lambda": ("system", ("gamma_a_per_lambda", "gamma_b_per_lambda")),
    "Gamma": ("system", ("Gamma_1_per_lambda", "Gamma_2_per_lambda")),
    "Gamma_per_lambda": ("system", ("Gamma_1_per_lambda", "Gamma_2_per_lambda")),
    "n_th": ("system", ("n_th",)),
    "n_init": ("system", ("n_init",)),
    "r": ("squeeze", ("r",)),
    "phi": ("squeeze", ("phi",)),
    "trap_nu_per_lambda": ("system", ("trap_nu_per_lambda",)),
}

_SYSTEM_KEYS = {
    "Gamma_1_per_lambda", "Gamma_2_per_lambda", "gamma_a_per_lambda", "gamma_b_per_lambda",
    "n_th", "n_init", "trap_nu_per_lambda", "lamb_dicke",
}
_EVOLVE_KEYS = {"t_final_inv_lambda", "n_samples", "rel_tol", "abs_tol", "max_step_inv_lambda"}
_FIT_KEYS = ("start_fraction", "stop_fraction")
_VALIDATE_KEYS = {"nu_over_lambda", "bound", "dim", "t_final_inv_lambda", "n_samples"}


@dataclass
class ScenarioConfig:
    name: str
    system: SystemParams
    space: SpaceSpec
    evolve: EvolveConfig
    squeeze: SqueezeParams
    explicit_drives: bool = False
    outputs: dict = field(default_factory=dict)
    validate: dict = field(default_factory=dict)
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False)


@dataclass
class SweepSpec:
    name: str
    base: dict
    axis: str
    values: list
    reduce: str
    raw: dict = field(default_factory=dict, repr=False)


def _num(section, key, problems, default=None, required=False, minimum=None, positive=False):
    if key not in section:
        if required:
            problems.append(f"missing field {key!r}")
        return default
    v = section[key]
    try:
        v = float(v)
    except (TypeError, ValueError):
        problems.append(f"{key} must be a number, got {v!r}")
        return default
    if not math.isfinite(v):
        problems.append(f"{key} must be finite, got {v!r}")
    elif minimum is not None and v < minimum:
        problems.append(f"{key} must be >= {minimum}, got {v!r}")
    elif positive and v <= 0:
        problems.append(f"{key} must be > 0, got {v!r}")
    return v


def _complex(v, key, problems):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    problems.append(f"{key} must be a number or [re, im], got {v!r}")
    return 0j


def _unknown(section, allowed, where, problems):
    for k in section:
        if k not in allowed:
            problems.append(f"unknown field {where}.{k}")


def parse_scenario(data: dict) -> ScenarioConfig:
    """Validate a scenario mapping; every violated field is reported at once."""
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping")
    problems: list[str] = []
    _unknown(data, {"name", "description", "system", "squeeze", "drives", "space", "evolve", "outputs", "validate"},
             "scenario", problems)
    name = str(data.get("name") or "")
    if not name:
        problems.append("missing field 'name'")

    sysd = data.get("system") or {}
    if not isinstance(sysd, dict):
        problems.append("system must be a mapping")
        sysd = {}
    _unknown(sysd, _SYSTEM_KEYS, "system", problems)
    G1 = _num(sysd, "Gamma_1_per_lambda", problems, required=True, minimum=0)
    G2 = _num(sysd, "Gamma_2_per_lambda", problems, required=True, minimum=0)
    ga = _num(sysd, "gamma_a_per_lambda", problems, default=0.0, minimum=0)
    gb = _num(sysd, "gamma_b_per_lambda", problems, default=0.0, minimum=0)
    n_th = _num(sysd, "n_th", problems, default=0.0, minimum=0)
    n_init = _num(sysd, "n_init", problems, default=2.0, minimum=0)
    nu = _num(sysd, "trap_nu_per_lambda", problems, positive=True)
    ld = sysd.get("lamb_dicke", 0.1)
    if isinstance(ld, dict):
        eta = {k: _num(ld, k, problems, required=True) for k in DRIVE_KEYS}
    else:
        v = _num({"lamb_dicke": ld}, "lamb_dicke", problems, default=0.1)
        eta = {k: v for k in DRIVE_KEYS}
    for k, v in eta.items():
        if v is not None and not 0 < v < 1:
            problems.append(f"lamb_dicke[{k}] must lie in (0, 1), got {v!r}")

    has_sq, has_dr = "squeeze" in data, "drives" in data
    if has_sq == has_dr:
        problems.append("exactly one of 'squeeze' (target r/phi) or 'drives' (explicit couplings) is required")
    drives = None
    if has_sq and not has_dr:
        sq = data["squeeze"] or {}
        _unknown(sq, {"r", "phi", "coupling_per_lambda"}, "squeeze", problems)
        r = _num(sq, "r", problems, required=True, minimum=0)
        phi = _num(sq, "phi", problems, default=0.0)
        coupling = _complex(sq.get("coupling_per_lambda", 1.0), "coupling_per_lambda", problems)
        if coupling == 0:
            problems.append("coupling_per_lambda must be non-zero")
        if r is not None and phi is not None:
            drives = DriveSet.for_squeezing(r, phi, coupling)
    elif has_dr and not has_sq:
        dr = data["drives"] or {}
        keys = {f"lambda_{k}_per_lambda" for k in DRIVE_KEYS}
        _unknown(dr, keys, "drives", problems)
        vals = {}
        for k in DRIVE_KEYS:
            key = f"lambda_{k}_per_lambda"
            if key not in dr:
                problems.append(f"missing field drives.{key}")
            else:
                vals[k] = _complex(dr[key], key, problems)
        if len(vals) == 4:
            drives = DriveSet(vals["1x"], vals["1y"], vals["2x"], vals["2y"])

    spd = data.get("space") or {}
    _unknown(spd, {"dim_a", "dim_b"}, "space", problems)
    dims = []
    for key in ("dim_a", "dim_b"):
        v = spd.get(key, 18)
        if not isinstance(v, int) or isinstance(v, bool) or v < 2:
            problems.append(f"space.{key} must be an integer >= 2, got {v!r}")
            v = 18
        dims.append(v)

    evd = data.get("evolve") or {}
    _unknown(evd, _EVOLVE_KEYS, "evolve", problems)
    t_final = _num(evd, "t_final_inv_lambda", problems, required=True, positive=True)
    n_samples = evd.get("n_samples", 101)
    if not isinstance(n_samples, int) or n_samples < 2:
        problems.append(f"evolve.n_samples must be an integer >= 2, got {n_samples!r}")
        n_samples = 101
    rel_tol = _num(evd, "rel_tol", problems, default=1e-8, positive=True)
    abs_tol = _num(evd, "abs_tol", problems, default=1e-10, positive=True)
    max_step = evd.get("max_step_inv_lambda")
    max_step = math.inf if max_step is None else _num(evd, "max_step_inv_lambda", problems, positive=True)

    vd = data.get("validate") or {}
    _unknown(vd, _VALIDATE_KEYS, "validate", problems)
    outputs = data.get("outputs") or {}
    fit = outputs.get("fit") or {}
    if not isinstance(fit, dict):
        problems.append(f"outputs.fit must be a mapping, got {fit!r}")
        fit = {}
    _unknown(fit, _FIT_KEYS, "outputs.fit", problems)
    for key in _FIT_KEYS:
        v = fit.get(key)
        if v is not None and not (isinstance(v, (int, float)) and 0 < v < 1):
            problems.append(f"outputs.fit.{key} must lie in (0, 1), got {v!r}")

    if problems:
        raise ConfigError(problems)

    try:
        system = SystemParams(drives=drives, Gamma_1=G1, Gamma_2=G2, gamma_a=ga, gamma_b=gb,
                              n_th=n_th, n_init=n_init, eta=eta)
        if nu is not None:
            system = system.with_trap(nu * abs(drives.lambda_1x or 1.0))
        squeeze = solve_squeeze_params(drives)
        space = SpaceSpec(*dims)
        evolve = EvolveConfig.uniform(t_final, n_samples, rel_tol=rel_tol, abs_tol=abs_tol, max_step=max_step)
    except TMVSError as exc:
        raise ConfigError([str(exc)]) from exc

    return ScenarioConfig(
        name=name,
        system=system,
        space=space,
        evolve=evolve,
        squeeze=squeeze,
        explicit_drives=has_dr,
        outputs=dict(outputs),
        validate=dict(vd),
        description=str(data.get("description", "")),
        raw=copy.deepcopy(data),
    )


def read_mapping(source) -> dict:
    """Load a YAML file, or a built-in scenario/sweep by name."""
    if isinstance(source, dict):
        return copy.deepcopy(source)
    src = str(source)
    builtin = scenarios.get(src)
    if builtin is not None:
        return builtin
    path = Path(src)
    if not path.is_file():
        raise ConfigError(f"no such config file or built-in: {src!r}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_scenario(source, dim_a: int | None = None, dim_b: int | None = None) -> ScenarioConfig:
    data = read_mapping(source)
    apply_dim_overrides(data, dim_a, dim_b)
    return parse_scenario(data)


def apply_dim_overrides(data: dict, dim_a=None, dim_b=None):
    space = data.setdefault("space", {}) or {}
    data["space"] = space
    if dim_a is not None:
        space["dim_a"] = int(dim_a)
    if dim_b is not None:
        space["dim_b"] = int(dim_b)
    return data


def set_axis(data: dict, axis: str, value) -> dict:
    """Copy of a raw scenario mapping with one parameter replaced."""
    out = copy.deepcopy(data)
    if axis in AXIS_ALIASES:
        section, keys = AXIS_ALIASES[axis]
    elif "." in axis:
        section, key = axis.split(".", 1)
        keys = (key,)
    elif axis in _SYSTEM_KEYS:
        section, keys = "system", (axis,)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    block = out.setdefault(section, {})
    for k in keys:
        block[k] = value
    return out


def parse_sweep(data: dict) -> SweepSpec:
    problems = []
    if not isinstance(data, dict):
        raise ConfigError("sweep must be a mapping")
    _unknown(data, {"name", "description", "base", "axis", "values", "reduce"}, "sweep", problems)
    name = str(data.get("name") or "")
    if not name:
        problems.append("missing field 'name'")
    base = data.get("base")
    base_map = None
    if base is None:
        problems.append("missing field 'base'")
    else:
        try:
            base_map = read_mapping(base)
        except ConfigError as exc:
            problems.extend(exc.problems)
    axis = data.get("axis")
    if not isinstance(axis, str) or not axis:
        problems.append("missing field 'axis'")
    values = data.get("values")
    if not isinstance(values, list) or not values:
        problems.append("values must be a non-empty list")
        values = []
    else:
        for v in values:
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                problems.append(f"sweep value {v!r} is not a finite number")
    reduce = data.get("reduce")
    if reduce not in REDUCERS:
        problems.append(f"reduce must be one of {REDUCERS}, got {reduce!r}")
    if not problems:
        try:
            for v in values:
                parse_scenario(set_axis(base_map, axis, v))
        except ConfigError as exc:
            problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return SweepSpec(name, base_map, axis, [float(v) for v in values], reduce, raw=copy.deepcopy(data))


def load_sweep(source, dim_a=None, dim_b=None) -> SweepSpec:
    data = read_mapping(source)
    if "base" in data and (dim_a is not None or dim_b is not None):
        data["base"] = apply_dim_overrides(read_mapping(data["base"]), dim_a, dim_b)
    return parse_sweep(data)
