"""Scenario, steady-state, sweep and RWA-audit execution."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dynamics import (
    TrajectoryRecord,
    evolve,
    fit_relaxation_rate,
    sample_observables,
    steady_state,
    validate_rwa,
)
from ..errors import ConfigError, TMVSError
from ..hilbert import SpaceSpec, initial_state
from ..model import engineered_generator, lab_frame_generator
from ..observables import DuanConfig
from . import io, plotting
from .config import ScenarioConfig, SweepSpec, parse_scenario, set_axis

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    trajectory: TrajectoryRecord
    csv_path: Path
    manifest_path: Path
    figures: list = field(default_factory=list)
    flags: list = field(default_factory=list)


@dataclass
class SteadyResult:
    observables: dict
    csv_path: Path
    manifest_path: Path
    flags: list = field(default_factory=list)


@dataclass
class SweepResult:
    rows: list
    summary_path: Path
    figures: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r["status"] != "ok"]

    def values(self) -> np.ndarray:
        return np.array([r["result"] for r in self.rows], dtype=float)


def _formats(cfg: ScenarioConfig):
    return tuple(cfg.outputs.get("formats", ("svg",)))


def _references(cfg: ScenarioConfig) -> dict:
    sq = cfg.squeeze
    return {
        "mean_quanta_a": sq.mean_quanta,
        "mean_quanta_b": sq.mean_quanta,
        "duan_variance": sq.duan_variance,
        "tmvs_fidelity": 1.0,
    }


def _evolve_config(cfg: ScenarioConfig) -> TrajectoryRecord:
    rho0 = initial_state(cfg.space, cfg.system.n_init)
    gen = lab_frame_generator(cfg.system, cfg.space)
    return evolve(rho0, gen, cfg.evolve, target=cfg.squeeze, duan=DuanConfig(), params=cfg.system)


def _steady_observables(cfg: ScenarioConfig) -> dict:
    gen = lab_frame_generator(cfg.system, cfg.space)
    rho = steady_state(gen, preconditioner=engineered_generator(cfg.system, cfg.space))
    return sample_observables(rho.matrix, cfg.space.dims, cfg.squeeze, DuanConfig())


def run_scenario(cfg: ScenarioConfig, out_dir, *, plot: bool = True) -> RunResult:
    """Evolve the lab-frame master equation from the thermal initial state.

    Writes ``<name>.csv``, ``<name>.manifest.json`` and, with ``plot``,
    one figure per requested series into ``out_dir/<name>/``.
    """
    out = Path(out_dir) / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    traj = _evolve_config(cfg)
    wall = time.perf_counter() - t0
    csv_path = io.write_trajectory_csv(traj, out / f"{cfg.name}.csv")
    figures = []
    if plot:
        refs = _references(cfg)
        series = cfg.outputs.get("plot", ["mean_quanta_a", "duan_variance"])
        for name in series:
            figures += plotting.plot_series({cfg.name: traj}, name, out / f"{cfg.name}_{name}",
                                            reference=refs.get(name), formats=_formats(cfg))
    flags = io.truncation_flags(traj.metadata["max_leakage"])
    manifest = io.write_manifest(
        out / f"{cfg.name}.manifest.json",
        command="run",
        name=cfg.name,
        description=cfg.description,
        flags=flags,
        params=io.params_record(cfg),
        truncation={"max_leakage": traj.metadata["max_leakage"],
                    "final_leakage": traj.final("leakage")},
        integrator={k: traj.metadata[k] for k in ("nfev", "nsteps", "block_size", "max_hermiticity_defect",
                                                 "min_eigenvalue")}
        | {"method": "RK45", "wall_seconds": wall},
        final={k: traj.final(k) for k in traj.observables},
        outputs=[p.name for p in [csv_path, *figures]],
    )
    if flags:
        log.warning("%s: %s (max leakage %.2e)", cfg.name, ", ".join(flags), traj.metadata["max_leakage"])
    return RunResult(traj, csv_path, manifest, figures, flags)


def steady_scenario(cfg: ScenarioConfig, out_dir) -> SteadyResult:
    """Solve for the stationary state and write a one-row CSV at ``t = inf``."""
    out = Path(out_dir) / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    obs = _steady_observables(cfg)
    wall = time.perf_counter() - t0
    traj = TrajectoryRecord(np.array([math.inf]), {k: np.array([v]) for k, v in obs.items()})
    csv_path = io.write_trajectory_csv(traj, out / f"{cfg.name}.steady.csv")
    flags = io.truncation_flags(obs["leakage"])
    manifest = io.write_manifest(
        out / f"{cfg.name}.steady.manifest.json",
        command="steady",
        name=cfg.name,
        flags=flags,
        params=io.params_record(cfg),
        truncation={"max_leakage": obs["leakage"]},
        solver={"wall_seconds": wall},
        steady=obs,
        outputs=[csv_path.name],
    )
    return SteadyResult(obs, csv_path, manifest, flags)


def reduce_run(cfg: ScenarioConfig, reduce: str, out_dir, plot: bool = False):
    """Scalar summary of one scenario; returns ``(value, trajectory or None, flags)``."""
    if reduce.startswith("steady_"):
        res = steady_scenario(cfg, out_dir)
        key = {"steady_duan_variance": "duan_variance", "steady_mean_quanta_a": "mean_quanta_a",
               "steady_fidelity": "tmvs_fidelity"}[reduce]
        return res.observables[key], None, res.flags
    run = run_scenario(cfg, out_dir, plot=plot)
    if reduce == "fitted_rate":
        asym = _steady_observables(cfg)["mean_quanta_a"]
        window = cfg.outputs.get("fit") or {}
        rate = fit_relaxation_rate(run.trajectory, "mean_quanta_a", asym, **window)
        return rate, run.trajectory, run.flags
    key = {"final_mean_quanta_a": "mean_quanta_a", "final_duan_variance": "duan_variance",
           "final_fidelity": "tmvs_fidelity"}[reduce]
    return run.trajectory.final(key), run.trajectory, run.flags


def _sweep_job(index, value, data, axis, reduce, out_dir, plot):
    row = {"index": index, "axis": axis, "value": float(value), "reduce": reduce,
           "result": math.nan, "status": "ok", "flags": "", "error": ""}
    traj = None
    try:
        cfg = parse_scenario(data)
        result, traj, flags = reduce_run(cfg, reduce, out_dir, plot)
        row.update(result=float(result), flags=" ".join(flags), name=cfg.name)
    except (TMVSError, ArithmeticError, ValueError, MemoryError) as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return row, traj


def sweep_members(spec: SweepSpec) -> list[dict]:
    base_name = spec.base.get("name", spec.raw.get("name", "sweep"))
    members = []
    for i, v in enumerate(spec.values):
        data = set_axis(spec.base, spec.axis, v)
        data["name"] = f"{base_name}-{spec.axis}-{v:g}"
        members.append(data)
    return members


def run_sweep(spec: SweepSpec, out_dir, *, workers: int = 1, plot: bool = True) -> SweepResult:
    """Run every axis value, recording failures per row instead of aborting."""
    out = Path(out_dir) / spec.name
    out.mkdir(parents=True, exist_ok=True)
    summary = io.SummaryWriter(out / f"{spec.name}.summary.csv",
                               ("index", "axis", "value", "reduce", "result", "status", "flags", "error"))
    jobs = [(i, v, d, spec.axis, spec.reduce, out, plot)
            for i, (v, d) in enumerate(zip(spec.values, sweep_members(spec)))]
    rows, trajs = {}, {}

    def collect(row, traj):
        summary.append(row)
        rows[row["index"]] = row
        if traj is not None:
            trajs[row["index"]] = traj
        if row["status"] != "ok":
            log.error("sweep row %s=%g failed: %s", spec.axis, row["value"], row["error"])

    if workers <= 1 or len(jobs) == 1:
        for job in jobs:
            collect(*_sweep_job(*job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_job, *job) for job in jobs]
            for fut in as_completed(futures):
                collect(*fut.result())

    ordered = [rows[i] for i in sorted(rows)]
    figures = []
    if plot:
        good = [r for r in ordered if r["status"] == "ok"]
        if good:
            figures += plotting.plot_sweep(spec.axis, [r["value"] for r in good], [r["result"] for r in good],
                                           spec.reduce, out / f"{spec.name}_{spec.reduce}")
        if trajs:
            series = "duan_variance" if "duan" in spec.reduce else "mean_quanta_a"
            curves = {f"{spec.axis} = {ordered[i]['value']:g}": trajs[i] for i in sorted(trajs)}
            figures += plotting.plot_series(curves, series, out / f"{spec.name}_{series}")
    io.write_manifest(out / f"{spec.name}.manifest.json", command="sweep", name=spec.name,
                      axis=spec.axis, values=spec.values, reduce=spec.reduce, rows=ordered,
                      outputs=[f"{spec.name}.summary.csv", *[p.name for p in figures]])
    return SweepResult(ordered, summary.path, figures)


def rwa_grid(cfg: ScenarioConfig) -> list[float]:
    """Trap-frequency ratios to audit; a missing trap frequency is a config error."""
    grid = cfg.validate.get("nu_over_lambda")
    if grid is None:
        nu = cfg.raw.get("system", {}).get("trap_nu_per_lambda")
        if nu is None:
            raise ConfigError(["missing field system.trap_nu_per_lambda (or validate.nu_over_lambda)"])
        grid = [nu]
    if not isinstance(grid, (list, tuple)):
        grid = [grid]
    bad = [v for v in grid if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0]
    if bad or not grid:
        raise ConfigError([f"validate.nu_over_lambda entries must be positive numbers, got {bad or grid!r}"])
    return [float(v) for v in grid]


def validate_scenario(cfg: ScenarioConfig, out_dir, *, plot: bool = True):
    """RWA audit over the configured ``nu / (eta Omega)`` grid.

    Returns ``(rows, passed)`` where ``passed`` requires the largest-ratio
    deviation below the bound and a monotone decrease across the grid.
    """
    grid = sorted(rwa_grid(cfg))
    bound = float(cfg.validate.get("bound", 0.05))
    dim = int(cfg.validate.get("dim", min(cfg.space.dim_a, 8)))
    t_final = float(cfg.validate.get("t_final_inv_lambda", cfg.evolve.t_final))
    n_samples = int(cfg.validate.get("n_samples", len(cfg.evolve.sample_times)))
    ecfg = type(cfg.evolve).uniform(t_final, n_samples, rel_tol=cfg.evolve.rel_tol, abs_tol=cfg.evolve.abs_tol)
    out = Path(out_dir) / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for nu in grid:
        rep = validate_rwa(cfg.system, ecfg, nu, space=SpaceSpec(dim, dim))
        rows.append({"nu_over_lambda": nu, "max_trace_distance": rep.max_trace_distance,
                     **{f"dev_{k}": v for k, v in rep.observable_deviation.items()},
                     "passed": rep.passed(bound)})
        log.info("nu/eta Omega = %g: max trace distance %.3e", nu, rep.max_trace_distance)
    devs = [r["max_trace_distance"] for r in rows]
    monotone = all(a > b for a, b in zip(devs, devs[1:]))
    passed = rows[-1]["passed"] and monotone
    header = ("nu_over_lambda", "max_trace_distance", "dev_mean_quanta_a", "dev_mean_quanta_b",
              "dev_duan_variance", "passed")
    writer = io.SummaryWriter(out / f"{cfg.name}.rwa.csv", header)
    for r in rows:
        writer.append({**r, "passed": "pass" if r["passed"] else "fail"})
    figures = plotting.plot_rwa(rows, bound, out / f"{cfg.name}_rwa") if plot else []
    io.write_manifest(out / f"{cfg.name}.rwa.manifest.json", command="validate-rwa", name=cfg.name,
                      bound=bound, dim=dim, monotone=monotone, passed=passed, rows=rows,
                      outputs=[writer.path.name, *[p.name for p in figures]])
    return rows, passed
