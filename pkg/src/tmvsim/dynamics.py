"""Time evolution, steady states and relaxation-rate fitting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp
from scipy.integrate import RK45
from scipy.sparse.linalg import LinearOperator, gmres, splu

from .errors import (
    FitFailureError,
    InvalidArgumentError,
    InvalidDimensionError,
    NonUniqueSteadyStateError,
    NumericalIntegrityError,
    StiffnessError,
)
from .hilbert import DensityState, SpaceSpec, fock_leakage, initial_state, partial_trace
from .model import (
    Superoperator,
    SystemParams,
    TimeDependentGenerator,
    full_model_generator,
    lab_frame_generator,
    unvec,
    vec,
)
from .observables import DuanConfig, duan_total_variance, mean_quanta
from .states import SqueezeParams, fidelity_to_tmvs

log = logging.getLogger(__name__)

SERIES = (
    "mean_quanta_a",
    "mean_quanta_b",
    "duan_variance",
    "tmvs_fidelity",
    "pop_atom_0",
    "pop_atom_1",
    "pop_atom_2",
    "leakage",
)

TRACE_SAMPLE_TOL = 1e-6
LEAKAGE_LIMIT = 1e-4
POSITIVITY_FLOOR = -1e-6
# above this Hilbert-space size only the final sample is diagonalised
POSITIVITY_CHECK_ALL = 600


@dataclass(frozen=True)
class EvolveConfig:
    """Integration window and tolerances; times are in units of 1/lambda."""

    t_final: float
    sample_times: tuple = ()
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf

    def __post_init__(self):
        problems = []
        if not (np.isfinite(self.t_final) and self.t_final > 0):
            problems.append(f"t_final must be finite and > 0, got {self.t_final!r}")
        ts = tuple(float(t) for t in self.sample_times) if len(self.sample_times) else None
        if ts is None and not problems:
            ts = tuple(np.linspace(0.0, self.t_final, 101))
        if ts is not None:
            if any(b < a for a, b in zip(ts, ts[1:])):
                problems.append("sample_times must be sorted")
            if ts and (ts[0] < 0 or ts[-1] > self.t_final * (1 + 1e-12)):
                problems.append("sample_times must lie in [0, t_final]")
            object.__setattr__(self, "sample_times", ts)
        for name in ("rel_tol", "abs_tol", "max_step"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        if problems:
            raise InvalidArgumentError("; ".join(problems))

    @classmethod
    def uniform(cls, t_final: float, n_samples: int = 101, **kw) -> "EvolveConfig":
        return cls(t_final, tuple(np.linspace(0.0, t_final, n_samples)), **kw)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    observables: dict
    params_snapshot: SystemParams | None = None
    metadata: dict = field(default_factory=dict)
    states: list | None = None

    def __post_init__(self):
        n = len(self.times)
        for k, v in self.observables.items():
            if len(v) != n:
                raise InvalidDimensionError(f"series {k!r} has {len(v)} samples, expected {n}")
        if "leakage" not in self.observables:
            raise InvalidArgumentError("every trajectory must carry a leakage series")

    def final(self, name: str) -> float:
        return float(self.observables[name][-1])

    @property
    def truncation_suspect(self) -> bool:
        return bool(np.max(self.observables["leakage"]) > LEAKAGE_LIMIT)


def sample_observables(rho: np.ndarray, dims, target: SqueezeParams | None, duan: DuanConfig) -> dict:
    """All trajectory series for one density matrix on the full space."""
    mode_dims = tuple(dims[:2])
    modes = partial_trace(rho, ("a", "b"), dims)
    atom = np.real(np.diag(partial_trace(rho, ("atom",), dims)))
    return {
        "mean_quanta_a": mean_quanta(modes, "a", mode_dims),
        "mean_quanta_b": mean_quanta(modes, "b", mode_dims),
        "duan_variance": duan_total_variance(modes, duan, mode_dims),
        "tmvs_fidelity": fidelity_to_tmvs(modes, target, mode_dims) if target is not None else math.nan,
        "pop_atom_0": float(atom[0]),
        "pop_atom_1": float(atom[1]),
        "pop_atom_2": float(atom[2]),
        "leakage": fock_leakage(rho, dims),
    }


def evolve(
    rho0: DensityState,
    generator,
    cfg: EvolveConfig,
    *,
    target: SqueezeParams | None = None,
    duan: DuanConfig = DuanConfig(),
    params: SystemParams | None = None,
    keep_states: bool = False,
) -> TrajectoryRecord:
    """Integrate the master equation with adaptive Dormand-Prince RK4(5).

    Static generators are restricted to the invariant block containing the
    support of ``rho0`` before integration; this is exact because the
    generator is block diagonal over its connected components.  Time-dependent
    generators are applied matrix-free and the step is capped at 1/20 of the
    period of ``generator.step_frequency`` (the trap frequency).

    Hermiticity is restored at sample points only.

    Raises
    ------
    StiffnessError
        The step size underflowed; ``err.t`` is the time reached.
    NumericalIntegrityError
        A sampled state lost trace beyond ``1e-6`` or has an eigenvalue
        below ``-1e-6``.  Positivity is checked at every sample for spaces
        of at most 600 states and at the final sample otherwise.
    """
    space = rho0.space
    if generator.space != space:
        raise InvalidDimensionError(f"generator space {generator.space} does not match state space {space}")
    D = space.total
    y_full = vec(rho0.matrix).astype(complex)
    max_step = cfg.max_step
    meta = {"dims": list(space.dims)}

    if isinstance(generator, Superoperator):
        idx = generator.support_closure(np.flatnonzero(y_full))
        Lr = generator.matrix[idx][:, idx].tocsr()
        meta["block_size"] = int(idx.size)
        fun = lambda t, y: Lr @ y  # noqa: E731
        y0 = y_full[idx]
        trivial = Lr.nnz == 0
    elif isinstance(generator, TimeDependentGenerator):
        idx = None
        fun = generator.rhs
        y0 = y_full
        w = generator.step_frequency
        if w > 0:
            max_step = min(max_step, 2 * math.pi / w / 20)
        meta["block_size"] = int(y_full.size)
        trivial = False
    else:
        raise InvalidArgumentError(f"unsupported generator type {type(generator).__name__}")

    times = np.asarray(cfg.sample_times, dtype=float)
    samples: list[np.ndarray] = []
    nfev = nsteps = 0
    if trivial:
        samples = [y0] * len(times)
    else:
        solver = RK45(fun, 0.0, y0, cfg.t_final, rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=max_step)
        k = 0
        while k < len(times) and times[k] <= 0.0:
            samples.append(y0)
            k += 1
        while k < len(times):
            if solver.status != "running":
                break
            message = solver.step()
            nsteps += 1
            if solver.status == "failed":
                raise StiffnessError(f"integrator step size underflow at t = {solver.t:.6g}: {message}", solver.t)
            if k < len(times) and times[k] <= solver.t:
                dense = solver.dense_output()
                while k < len(times) and times[k] <= solver.t:
                    samples.append(dense(times[k]))
                    k += 1
        nfev = solver.nfev
        if k < len(times):
            raise StiffnessError(f"integration stopped early at t = {solver.t:.6g}", solver.t)

    series = {name: np.empty(len(times)) for name in SERIES}
    states = [] if keep_states else None
    herm_dev = 0.0
    min_eig = math.inf
    for i, y in enumerate(samples):
        if idx is not None:
            v = np.zeros(D * D, dtype=complex)
            v[idx] = y
        else:
            v = y
        rho = unvec(v, D)
        herm_dev = max(herm_dev, float(np.abs(rho - rho.conj().T).max()))
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if abs(tr - 1) > TRACE_SAMPLE_TOL:
            raise NumericalIntegrityError(f"trace drifted to {tr:.9f} at t = {times[i]:.6g}")
        if D <= POSITIVITY_CHECK_ALL or i == len(samples) - 1:
            low = float(np.linalg.eigvalsh(rho)[0])
            min_eig = min(min_eig, low)
            if low < POSITIVITY_FLOOR:
                raise NumericalIntegrityError(f"state lost positivity (eigenvalue {low:.3e}) at t = {times[i]:.6g}")
        for name, val in sample_observables(rho, space.dims, target, duan).items():
            series[name][i] = val
        if keep_states:
            states.append(DensityState(space, rho, check=False))

    meta.update(nfev=int(nfev), nsteps=int(nsteps), max_hermiticity_defect=herm_dev, min_eigenvalue=min_eig,
                max_leakage=float(series["leakage"].max()))
    meta["truncation_suspect"] = meta["max_leakage"] > LEAKAGE_LIMIT
    if meta["truncation_suspect"]:
        log.warning("Fock leakage %.2e exceeds %.0e: truncation suspect", meta["max_leakage"], LEAKAGE_LIMIT)
    return TrajectoryRecord(times, series, params, meta, states)


def _trace_block(generator: Superoperator):
    D = generator.space.total
    diag = np.arange(D) * (D + 1)
    labels = generator.block_labels()
    comps = np.unique(labels[diag])
    if comps.size > 1:
        raise NonUniqueSteadyStateError(
            f"trace-carrying sector splits into {comps.size} decoupled blocks; steady state is not unique",
            int(comps.size),
        )
    idx = np.flatnonzero(labels == comps[0])
    return idx, np.searchsorted(idx, diag)


def _trace_constrained(Lr, pos):
    """Replace the first population row of ``Lr`` by the trace functional."""
    n = Lr.shape[0]
    row = pos[0]
    keep = np.ones(n)
    keep[row] = 0.0
    trace_row = sp.csr_matrix((np.ones(pos.size, dtype=complex), (np.full(pos.size, row), pos)), shape=(n, n))
    A = (sp.diags(keep) @ Lr + trace_row).tocsc()
    rhs = np.zeros(n, dtype=complex)
    rhs[row] = 1.0
    return A, rhs


def _factorize(A):
    try:
        return splu(A, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise NonUniqueSteadyStateError(f"trace-constrained generator is singular ({exc})", 2) from exc


def steady_state(generator: Superoperator, *, preconditioner: Superoperator | None = None,
                 dense_limit: int = 2000, null_tol: float = 1e-10, residual_tol: float = 1e-9) -> DensityState:
    """Null-space density matrix of a static generator.

    The solve is restricted to the invariant block holding the diagonal, and
    one of the (linearly dependent) population rows is replaced by the trace
    constraint.  Blocks of at most ``dense_limit`` indices use a dense SVD,
    which also yields the null-space dimension.  Larger blocks are factorised
    with sparse LU; when ``preconditioner`` is given (a nearby generator with
    the same block structure whose LU has little fill, e.g. the model without
    its thermal channels), its factorisation preconditions GMRES on the full
    generator instead.

    Raises
    ------
    NonUniqueSteadyStateError
        The null space is degenerate.
    NumericalIntegrityError
        The result violates the residual or density-matrix invariants.
    """
    if not isinstance(generator, Superoperator):
        raise InvalidArgumentError("steady_state requires a static Superoperator")
    space = generator.space
    D = space.total
    idx, pos = _trace_block(generator)
    Lr = generator.matrix[idx][:, idx]
    n = idx.size

    if n <= dense_limit:
        _, s, vh = scipy.linalg.svd(Lr.toarray())
        scale = max(s[0], 1.0)
        null_dim = int(np.sum(s < null_tol * scale))
        if null_dim != 1:
            raise NonUniqueSteadyStateError(f"null space dimension {null_dim} (expected 1)", null_dim)
        x = vh[-1].conj()
    else:
        A, rhs = _trace_constrained(Lr, pos)
        x = None
        if preconditioner is not None:
            if preconditioner.space != space:
                raise InvalidDimensionError("preconditioner space does not match generator space")
            P, _ = _trace_constrained(preconditioner.matrix[idx][:, idx], pos)
            lu = _factorize(P)
            M = LinearOperator(A.shape, matvec=lu.solve, dtype=complex)
            x, info = gmres(A, rhs, x0=lu.solve(rhs), M=M, rtol=1e-13, atol=0.0, restart=100, maxiter=20)
            if info != 0:
                log.info("preconditioned GMRES did not converge (info=%d); falling back to direct LU", info)
                x = None
        if x is None:
            x = _factorize(A).solve(rhs)
        if not np.all(np.isfinite(x)):
            raise NonUniqueSteadyStateError("trace-constrained solve produced non-finite values", 2)

    v = np.zeros(D * D, dtype=complex)
    v[idx] = x
    rho = unvec(v, D)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    resid = float(np.abs(generator.matrix @ vec(rho)).max())
    if resid > residual_tol:
        raise NumericalIntegrityError(f"steady-state residual {resid:.3e} exceeds {residual_tol:g}")
    return DensityState(space, rho)


def fit_relaxation_rate(
    traj: TrajectoryRecord,
    observable: str,
    asymptote: float | None = None,
    *,
    start_fraction: float = 0.5,
    stop_fraction: float | None = None,
    floor: float = 1e-9,
    min_decades: float = 2.0,
    max_log_residual: float = 0.25,
) -> float:
    """Exponential relaxation rate of ``|obs(t) - obs(inf)|``.

    With ``asymptote`` given, a straight line is fitted to
    ``log|obs - asymptote|`` over the tail that starts once the distance has
    fallen below ``start_fraction`` of its maximum.  ``stop_fraction`` ends
    the window once the distance drops below that fraction of the maximum,
    which keeps small slow components (for example Fock-truncation modes) out
    of the fit.  Without ``asymptote``, the model
    ``c exp(-k t) + const`` is fitted by nonlinear least squares.

    Raises
    ------
    FitFailureError
        Tail too short (fewer than ``min_decades`` decades), the distance
        changes sign (oscillation), or the log-fit residual is too large.
    """
    t = np.asarray(traj.times, dtype=float)
    y = np.asarray(traj.observables[observable], dtype=float)
    if asymptote is None:
        return _fit_free_asymptote(t, y)
    d = y - asymptote
    dist = np.abs(d)
    k0 = int(np.argmax(dist))
    below = np.flatnonzero(dist[k0:] <= start_fraction * dist[k0])
    if below.size == 0:
        raise FitFailureError("observable never relaxes below the start fraction")
    start = k0 + below[0]
    stop = t.size
    if stop_fraction is not None:
        under = np.flatnonzero(dist[start:] < stop_fraction * dist[k0])
        stop = start + under[0] if under.size else t.size
    sel = np.arange(start, stop)
    sel = sel[dist[sel] > floor * max(1.0, abs(asymptote))]
    if sel.size < 3:
        raise FitFailureError("fewer than three usable points in the relaxation tail")
    if np.any(np.sign(d[sel]) != np.sign(d[sel[0]])):
        raise FitFailureError("distance to the asymptote changes sign: oscillatory tail")
    decades = math.log10(dist[sel].max() / dist[sel].min())
    if decades < min_decades:
        raise FitFailureError(f"tail spans only {decades:.2f} decades (need {min_decades})")
    slope, icpt = np.polyfit(t[sel], np.log(dist[sel]), 1)
    resid = float(np.sqrt(np.mean((np.log(dist[sel]) - (slope * t[sel] + icpt)) ** 2)))
    if resid > max_log_residual:
        raise FitFailureError(f"log-linear fit residual {resid:.3f} exceeds {max_log_residual}", resid)
    return float(-slope)


def _fit_free_asymptote(t, y):
    span = t[-1] - t[0]
    guess = (y[0] - y[-1], 3.0 / span if span > 0 else 1.0, y[-1])

    def model(t, c, k, const):
        return c * np.exp(-k * t) + const

    try:
        popt, _ = scipy.optimize.curve_fit(model, t, y, p0=guess, maxfev=20000, xtol=1e-14, ftol=1e-14)
    except RuntimeError as exc:
        raise FitFailureError(f"exponential fit did not converge: {exc}") from exc
    resid = float(np.sqrt(np.mean((model(t, *popt) - y) ** 2)))
    scale = max(abs(popt[0]), 1e-300)
    if resid > 1e-3 * scale:
        raise FitFailureError(f"exponential fit residual {resid:.3e} too large", resid)
    return float(popt[1])


def trace_distance(rho1, rho2) -> float:
    m1 = getattr(rho1, "matrix", rho1)
    m2 = getattr(rho2, "matrix", rho2)
    diff = np.asarray(m1) - np.asarray(m2)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


@dataclass
class RWAReport:
    nu_over_lambda: float
    max_trace_distance: float
    observable_deviation: dict
    effective: TrajectoryRecord
    full: TrajectoryRecord

    def passed(self, bound: float = 0.05) -> bool:
        return self.max_trace_distance <= bound


def validate_rwa(params: SystemParams, cfg: EvolveConfig, nu_over_lambda: float, *,
                 space: SpaceSpec = SpaceSpec(8, 8)) -> RWAReport:
    """Compare the full sideband model with its rotating-wave reduction.

    The trap frequency is ``nu = nu_over_lambda * |lambda_1x|`` (so
    ``nu_over_lambda`` is ``nu / (eta Omega)``), with resonant detunings.
    Both evolutions start from the default initial state and share all
    dissipators.
    """
    if not (np.isfinite(nu_over_lambda) and nu_over_lambda > 0):
        raise InvalidArgumentError(f"nu_over_lambda must be > 0, got {nu_over_lambda!r}")
    scale = abs(params.drives.lambda_1x) or 1.0
    nu = nu_over_lambda * scale
    full_params = params.with_trap(nu)
    rho0 = initial_state(space, params.n_init)
    eff = evolve(rho0, lab_frame_generator(params, space), cfg, params=params, keep_states=True)
    full = evolve(rho0, full_model_generator(full_params, space), cfg, params=full_params, keep_states=True)
    tdist = max(
        trace_distance(partial_trace(s1, ("a", "b")), partial_trace(s2, ("a", "b")))
        for s1, s2 in zip(eff.states, full.states)
    )
    dev = {
        name: float(np.max(np.abs(eff.observables[name] - full.observables[name])))
        for name in ("mean_quanta_a", "mean_quanta_b", "duan_variance")
    }
    return RWAReport(float(nu_over_lambda), tdist, dev, eff, full)
