"""Static line plots of trajectories and sweep summaries."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {
    "mean_quanta_a": r"$\langle a^\dagger a\rangle$",
    "mean_quanta_b": r"$\langle b^\dagger b\rangle$",
    "duan_variance": "EPR total variance",
    "tmvs_fidelity": "fidelity to target",
    "leakage": "top-level Fock population",
}

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.5,
    "svg.hashsalt": "tmvsim",
}


def _save(fig, path, formats):
    paths = []
    for ext in formats:
        p = Path(path).with_suffix("." + ext)
        fig.savefig(p, metadata={"Date": None} if ext == "svg" else None)
        paths.append(p)
    plt.close(fig)
    return paths


def plot_series(curves: dict, name: str, path, *, reference: float | None = None,
                reference_label: str = "target", formats=("svg",), title: str | None = None):
    """One observable against time for one or more labelled trajectories."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, traj in curves.items():
            ax.plot(traj.times, traj.observables[name], label=label)
        if reference is not None:
            ax.axhline(reference, color="k", ls="--", lw=1, label=reference_label)
        ax.set_xlabel(r"$\lambda t$")
        ax.set_ylabel(LABELS.get(name, name))
        if name == "leakage":
            ax.set_yscale("log")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path, formats)


def plot_sweep(axis: str, values, results, reduce: str, path, formats=("svg",)):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(values, results, "o-")
        ax.set_xlabel(axis)
        ax.set_ylabel(reduce)
        if min(values) > 0 and max(values) / min(values) > 50:
            ax.set_xscale("log")
        fig.tight_layout()
        return _save(fig, path, formats)


def plot_rwa(rows, bound, path, formats=("svg",)):
    nus = [r["nu_over_lambda"] for r in rows]
    dev = [r["max_trace_distance"] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(nus, dev, "o-", label="max trace distance")
        ax.axhline(bound, color="k", ls="--", lw=1, label="bound")
        ax.set_xlabel(r"$\nu/\eta\Omega$")
        ax.set_ylabel("deviation")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path, formats)
