"""CSV and manifest emission."""

from __future__ import annotations

import csv
import json
import math
import subprocess
import threading
from dataclasses import asdict, fields, is_dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..dynamics import LEAKAGE_LIMIT, SERIES, TrajectoryRecord

CSV_HEADER = ("t",) + SERIES


def fmt(x) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def write_trajectory_csv(traj: TrajectoryRecord, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, t in enumerate(traj.times):
            w.writerow([fmt(t)] + [fmt(traj.observables[name][i]) for name in SERIES])
    return path


def read_trajectory_csv(path) -> tuple[np.ndarray, dict]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return data["t"], {name: data[name] for name in SERIES}


def version_string() -> str:
    """Package version plus ``git describe`` of the source tree when available."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        desc = out.stdout.strip() if out.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"{__version__}+g{desc}" if desc else __version__


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def truncation_flags(max_leakage: float) -> list[str]:
    return ["truncation-suspect"] if max_leakage > LEAKAGE_LIMIT else []


def write_manifest(path, **entries) -> Path:
    path = Path(path)
    doc = {"version": version_string(), **entries}
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n")
    return path


def params_record(cfg) -> dict:
    return {
        "system": asdict(cfg.system) | {"drives": cfg.system.drives.as_dict()},
        "squeeze": {"r": cfg.squeeze.r, "phi": cfg.squeeze.phi, "explicit_drives": cfg.explicit_drives},
        "space": {"dim_a": cfg.space.dim_a, "dim_b": cfg.space.dim_b, "dim_atom": cfg.space.dim_atom},
        "evolve": {
            "t_final_inv_lambda": cfg.evolve.t_final,
            "n_samples": len(cfg.evolve.sample_times),
            "rel_tol": cfg.evolve.rel_tol,
            "abs_tol": cfg.evolve.abs_tol,
            "max_step_inv_lambda": cfg.evolve.max_step,
        },
    }


class SummaryWriter:
    """Row-at-a-time CSV sink shared by concurrent sweep runs."""

    def __init__(self, path, header):
        self.path = Path(path)
        self.header = tuple(header)
        self._lock = threading.Lock()
        with self.path.open("w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(self.header)

    def append(self, row: dict):
        cells = [row.get(k, "") for k in self.header]
        cells = [fmt(c) if isinstance(c, (float, np.floating)) else c for c in cells]
        with self._lock, self.path.open("a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(cells)
