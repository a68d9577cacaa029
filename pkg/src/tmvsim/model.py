"""Hamiltonians, Lindblad dissipators and Liouvillian assembly.

Units: hbar = 1, and every rate and time is measured in units of the primary
sideband coupling ``lambda = lambda_1x``.

Vectorisation is column stacking, ``vec(A X B) = (B^T (x) A) vec(X)``, so

* ``-i[H, rho]``      -> ``-i (I (x) H - H^T (x) I)``
* ``c rho c^dag``     -> ``conj(c) (x) c``
* ``c^dag c rho``     -> ``I (x) c^dag c``
* ``rho c^dag c``     -> ``(c^dag c)^T (x) I``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import InvalidArgumentError, InvalidDimensionError, InvalidHamiltonianError, InconsistentDrivesError
from .hilbert import Operator, SpaceSpec, mode_operator, sigma
from .states import DriveSet, SqueezeParams, headroom, interior_columns, squeeze_residuals, squeeze_sparse

DRIVE_KEYS = ("1x", "1y", "2x", "2y")


@dataclass(frozen=True)
class SystemParams:
    """Physical knobs of the trapped-ion scheme, in units of lambda.

    The detunings, trap frequencies and Lamb-Dicke parameters are only used
    by the full sideband model (:func:`full_hamiltonian_at`).
    """

    drives: DriveSet
    Gamma_1: float = 10.0
    Gamma_2: float = 10.0
    gamma_a: float = 0.0
    gamma_b: float = 0.0
    n_th: float = 0.0
    n_init: float = 2.0
    delta_1x: float | None = None
    delta_1y: float | None = None
    delta_2x: float | None = None
    delta_2y: float | None = None
    trap_nu_x: float | None = None
    trap_nu_y: float | None = None
    eta: dict = field(default_factory=lambda: {k: 0.1 for k in DRIVE_KEYS})

    def __post_init__(self):
        problems = []
        for name in ("Gamma_1", "Gamma_2", "gamma_a", "gamma_b", "n_th", "n_init"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                problems.append(f"{name} must be finite and >= 0, got {v!r}")
        if set(self.eta) != set(DRIVE_KEYS):
            problems.append(f"eta must define {DRIVE_KEYS}")
        else:
            for k, v in self.eta.items():
                if not 0 < v < 1:
                    problems.append(f"eta[{k}] must lie in (0, 1), got {v!r}")
        if problems:
            raise InvalidArgumentError("; ".join(problems))

    @classmethod
    def reference_regime(cls, r=1.0, gamma=0.0, Gamma=10.0, n_th=0.5, n_init=2.0, coupling=1.0, phi=0.0):
        """Symmetric couplings, equal atomic and motional decay rates."""
        return cls(
            drives=DriveSet.for_squeezing(r, phi, coupling),
            Gamma_1=Gamma,
            Gamma_2=Gamma,
            gamma_a=gamma,
            gamma_b=gamma,
            n_th=n_th,
            n_init=n_init,
        )

    def with_trap(self, nu_x: float, nu_y: float | None = None) -> "SystemParams":
        """Copy with resonant sideband detunings for trap frequencies ``nu_x, nu_y``."""
        nu_y = nu_x if nu_y is None else nu_y
        return replace(
            self,
            trap_nu_x=nu_x,
            trap_nu_y=nu_y,
            delta_1x=-nu_x,
            delta_2x=nu_x,
            delta_1y=nu_y,
            delta_2y=-nu_y,
        )

    @property
    def has_full_model(self) -> bool:
        return None not in (self.trap_nu_x, self.trap_nu_y, self.delta_1x, self.delta_1y, self.delta_2x, self.delta_2y)

    def check_resonance(self, tol: float = 1e-12):
        missing = [
            n for n in ("trap_nu_x", "trap_nu_y", "delta_1x", "delta_1y", "delta_2x", "delta_2y")
            if getattr(self, n) is None
        ]
        if missing:
            raise InvalidArgumentError(f"full model requires {', '.join(missing)}")
        nx, ny = self.trap_nu_x, self.trap_nu_y
        want = {"delta_1x": -nx, "delta_2x": nx, "delta_1y": ny, "delta_2y": -ny}
        bad = [f"{k}={getattr(self, k)!r} (expected {v!r})" for k, v in want.items() if abs(getattr(self, k) - v) > tol]
        if bad:
            raise InvalidArgumentError("sideband resonance violated: " + ", ".join(bad))

    def rabi(self) -> dict:
        """Complex Rabi frequencies ``Omega = lambda / (i eta)``."""
        lam = self.drives.as_dict()
        return {k: lam[f"lambda_{k}"] / (1j * self.eta[k]) for k in DRIVE_KEYS}

    def detunings(self) -> dict:
        return {k: getattr(self, f"delta_{k}") for k in DRIVE_KEYS}


class Superoperator:
    """Sparse ``(D^2, D^2)`` generator acting on column-stacked density matrices."""

    __slots__ = ("space", "matrix", "_labels")

    def __init__(self, space: SpaceSpec, matrix):
        m = sp.csr_matrix(matrix, dtype=complex)
        n = space.total ** 2
        if m.shape != (n, n):
            raise InvalidDimensionError(f"superoperator shape {m.shape} does not match (D^2, D^2) = {(n, n)}")
        self.space = space
        self.matrix = m
        self._labels = None

    @classmethod
    def zero(cls, space: SpaceSpec) -> "Superoperator":
        n = space.total ** 2
        return cls(space, sp.csr_matrix((n, n), dtype=complex))

    def __add__(self, other):
        if not isinstance(other, Superoperator):
            return NotImplemented
        if other.space != self.space:
            raise InvalidDimensionError(f"space mismatch: {self.space} vs {other.space}")
        return Superoperator(self.space, self.matrix + other.matrix)

    def __mul__(self, scalar):
        return Superoperator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def apply(self, rho) -> np.ndarray:
        """Generator applied to a density matrix, returned as a matrix."""
        m = getattr(rho, "matrix", rho)
        D = self.space.total
        return unvec(self.matrix @ vec(np.asarray(m)), D)

    def trace_defect(self) -> float:
        """``max |vec(I)^T L|``; zero for a trace-preserving generator."""
        D = self.space.total
        diag = np.arange(D) * (D + 1)
        row = np.asarray(self.matrix[diag].sum(axis=0)).ravel()
        return float(np.abs(row).max()) if row.size else 0.0

    def block_labels(self) -> np.ndarray:
        """Weakly connected component label of every vectorised index.

        The generator is block diagonal over these components, so any
        component union is an invariant subspace.  Symmetries of the model
        (here the conserved ``n_a - n_b`` plus atomic excitation balance)
        show up as many small blocks.
        """
        if self._labels is None:
            m = self.matrix
            pattern = sp.csr_matrix((np.ones(m.nnz), m.indices, m.indptr), shape=m.shape)
            _, self._labels = connected_components(pattern, directed=True, connection="weak")
        return self._labels

    def support_closure(self, seeds) -> np.ndarray:
        """Sorted indices of all blocks touched by ``seeds``."""
        labels = self.block_labels()
        keep = np.isin(labels, np.unique(labels[np.asarray(seeds)]))
        return np.flatnonzero(keep)

    def __repr__(self):
        return f"Superoperator(dims={self.space.dims}, nnz={self.matrix.nnz})"


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, D: int) -> np.ndarray:
    return np.asarray(v).reshape(D, D, order="F")


# --------------------------------------------------------------------------
# Hamiltonians
# --------------------------------------------------------------------------

def effective_hamiltonian(drives: DriveSet, space: SpaceSpec) -> Operator:
    """Resonant sideband Hamiltonian after the rotating-wave approximation.

    ``H = lambda_1x a s10 + lambda_1y b^dag s10 + lambda_2y b s20 + lambda_2x a^dag s20 + h.c.``
    """
    a = mode_operator(space, "a")
    b = mode_operator(space, "b")
    s10 = sigma(space, 1, 0)
    s20 = sigma(space, 2, 0)
    up = (
        drives.lambda_1x * (a @ s10)
        + drives.lambda_1y * (b.dag() @ s10)
        + drives.lambda_2y * (b @ s20)
        + drives.lambda_2x * (a.dag() @ s20)
    )
    return up + up.dag()


def squeezed_couplings(drives: DriveSet, params: SqueezeParams) -> tuple[complex, complex]:
    """Beam-splitter couplings ``(lambda~_a, lambda~_b)`` in the squeezed frame."""
    ch, sh = math.cosh(params.r), math.sinh(params.r)
    e = np.exp(-1j * params.phi)
    lam_a = drives.lambda_1x * ch - e * drives.lambda_1y * sh
    lam_b = drives.lambda_2y * ch - e * drives.lambda_2x * sh
    return complex(lam_a), complex(lam_b)


def transformed_hamiltonian(drives: DriveSet, params: SqueezeParams, space: SpaceSpec, tol: float = 1e-9) -> Operator:
    """``S^dag H S`` written out in closed form: only the two beam-splitter terms survive."""
    res = squeeze_residuals(drives, params)
    if max(res) > tol:
        raise InconsistentDrivesError(
            f"squeeze parameters do not cancel the cross couplings (residual {max(res):.3e} > {tol:g})"
        )
    lam_a, lam_b = squeezed_couplings(drives, params)
    a = mode_operator(space, "a")
    b = mode_operator(space, "b")
    up = lam_a * (a @ sigma(space, 1, 0)) + lam_b * (b @ sigma(space, 2, 0))
    return up + up.dag()


def conjugation_residual(drives: DriveSet, params: SqueezeParams, space: SpaceSpec, margin: int = 4,
                         pad: int | None = None) -> float:
    """Max-norm of ``S^dag H S - H~`` on interior states (both levels ``<= dim - margin``).

    Both sides are built in a truncation enlarged by :func:`headroom` levels,
    so the comparison on the interior is free of cutoff artifacts.
    """
    pad = headroom(params.r, max(space.mode_dims)) if pad is None else pad
    big = SpaceSpec(space.dim_a + pad, space.dim_b + pad)
    cols2 = interior_columns(space.mode_dims, big.mode_dims, margin)
    cols = (cols2[:, None] * 3 + np.arange(3)).ravel()
    SP = sp.kron(squeeze_sparse(params, big)[:, cols2], sp.identity(3, format="csr"), format="csr")
    lhs = (SP.conj().T @ effective_hamiltonian(drives, big).matrix @ SP).toarray()
    rhs = transformed_hamiltonian(drives, params, big).matrix[cols][:, cols].toarray()
    return float(np.abs(lhs - rhs).max())


@dataclass(frozen=True)
class HamiltonianTerm:
    """``amplitude * exp(-i omega t) * op`` (its Hermitian conjugate is implied)."""

    amplitude: complex
    omega: float
    op: Operator


class TimeDependentHamiltonian:
    """``H(t) = sum_k amp_k exp(-i w_k t) A_k + h.c.``, grouped by frequency.

    All groups and their conjugates are scattered onto one shared sparsity
    pattern, so evaluating ``H(t)`` is a single small matrix product.
    ``step_frequency`` is the oscillation that bounds the integrator step
    (the trap frequency for the sideband model).
    """

    def __init__(self, space: SpaceSpec, terms: Sequence[HamiltonianTerm], step_frequency: float | None = None):
        self.space = space
        self.terms = tuple(terms)
        groups: dict[float, sp.csr_matrix] = {}
        for t in self.terms:
            key = float(t.omega)
            m = t.amplitude * t.op.matrix
            groups[key] = groups[key] + m if key in groups else m
        self.omegas = np.array(sorted(groups))
        self._mats = [groups[w].tocsr() for w in self.omegas]
        self.step_frequency = float(np.abs(self.omegas).max(initial=0.0)) if step_frequency is None else float(step_frequency)
        self._build_pattern()

    def _build_pattern(self):
        D = self.space.total
        mats = self._mats + [m.conj().T.tocsr() for m in self._mats]
        if not mats:
            self._pattern = sp.csr_matrix((D, D), dtype=complex)
            self._stack = np.zeros((0, 0), dtype=complex)
            return
        P = sum(abs(m) for m in mats).tocsr()
        P.sum_duplicates()
        P.sort_indices()
        P.data = np.arange(1, P.nnz + 1, dtype=float)
        stack = np.zeros((len(mats), P.nnz), dtype=complex)
        for k, m in enumerate(mats):
            c = m.tocoo()
            pos = np.asarray(P[c.row, c.col]).ravel().astype(int) - 1
            np.add.at(stack[k], pos, c.data)
        self._pattern = P
        self._stack = stack

    def _phases(self, t: float) -> np.ndarray:
        ph = np.exp(-1j * self.omegas * t)
        return np.concatenate([ph, ph.conj()])

    def matrix_at(self, t: float) -> sp.csr_matrix:
        P = self._pattern
        if P.nnz == 0:
            return P.copy()
        return sp.csr_matrix((self._phases(t) @ self._stack, P.indices, P.indptr), shape=P.shape)

    def raising_part(self, t: float) -> sp.csr_matrix:
        out = sp.csr_matrix((self.space.total,) * 2, dtype=complex)
        for w, m in zip(self.omegas, self._mats):
            out = out + m * np.exp(-1j * w * t)
        return out

    def at(self, t: float) -> Operator:
        return Operator(self.space, self.matrix_at(t))

    def stationary_part(self, tol: float = 0.0) -> Operator:
        """Sum of the terms with ``|omega| <= tol`` (plus h.c.)."""
        up = sp.csr_matrix((self.space.total,) * 2, dtype=complex)
        for w, m in zip(self.omegas, self._mats):
            if abs(w) <= tol:
                up = up + m
        return Operator(self.space, up + up.conj().T)


def full_hamiltonian(params: SystemParams, space: SpaceSpec) -> TimeDependentHamiltonian:
    """First-order Lamb-Dicke Hamiltonian in the interaction picture.

    For each drive ``(j, alpha)`` with Rabi frequency ``Omega``, detuning
    ``delta`` and Lamb-Dicke parameter ``eta`` on mode ``m`` (a for x, b for y)::

        Omega e^{-i delta t} [1 + i eta (m e^{-i nu t} + m^dag e^{i nu t})] s_{j0} + h.c.
    """
    params.check_resonance()
    rabi = params.rabi()
    det = params.detunings()
    modes = {"x": (mode_operator(space, "a"), params.trap_nu_x), "y": (mode_operator(space, "b"), params.trap_nu_y)}
    terms = []
    for key in DRIVE_KEYS:
        j, axis = int(key[0]), key[1]
        omega_rabi, delta, eta = rabi[key], det[key], params.eta[key]
        if omega_rabi == 0:
            continue
        m, nu = modes[axis]
        s = sigma(space, j, 0)
        terms.append(HamiltonianTerm(omega_rabi, delta, s))
        terms.append(HamiltonianTerm(1j * eta * omega_rabi, delta + nu, m @ s))
        terms.append(HamiltonianTerm(1j * eta * omega_rabi, delta - nu, m.dag() @ s))
    return TimeDependentHamiltonian(space, terms, step_frequency=max(params.trap_nu_x, params.trap_nu_y))


def full_hamiltonian_at(t: float, params: SystemParams, space: SpaceSpec) -> Operator:
    return full_hamiltonian(params, space).at(t)


# --------------------------------------------------------------------------
# Dissipators and generators
# --------------------------------------------------------------------------

def _identity(D):
    return sp.identity(D, dtype=complex, format="csr")


def lindblad_dissipator(c: Operator, rate: float) -> Superoperator:
    """``(rate/2) (2 c rho c^dag - c^dag c rho - rho c^dag c)`` as a superoperator."""
    if not np.isfinite(rate) or rate < 0:
        raise InvalidArgumentError(f"dissipation rate must be finite and >= 0, got {rate!r}")
    space = c.space
    if rate == 0:
        return Superoperator.zero(space)
    C = c.matrix
    cdc = (C.conj().T @ C).tocsr()
    I = _identity(space.total)
    L = sp.kron(C.conj(), C, format="csr") - 0.5 * sp.kron(I, cdc, format="csr") - 0.5 * sp.kron(cdc.T, I, format="csr")
    return Superoperator(space, rate * L)


def atomic_channels(params: SystemParams, space: SpaceSpec) -> list[tuple[Operator, float]]:
    """Spontaneous decay ``|1> -> |0>`` and ``|2> -> |0>``."""
    return [(sigma(space, 0, 1), params.Gamma_1), (sigma(space, 0, 2), params.Gamma_2)]


def thermal_channels(params: SystemParams, space: SpaceSpec) -> list[tuple[Operator, float]]:
    """Emission ``(n_th + 1) gamma`` and absorption ``n_th gamma`` for each mode."""
    out = []
    for mode, g in (("a", params.gamma_a), ("b", params.gamma_b)):
        op = mode_operator(space, mode)
        out.append((op, (params.n_th + 1) * g))
        out.append((op.dag(), params.n_th * g))
    return out


def thermal_liouvillian(params: SystemParams, space: SpaceSpec) -> Superoperator:
    total = Superoperator.zero(space)
    for c, rate in thermal_channels(params, space):
        total = total + lindblad_dissipator(c, rate)
    return total


def _dissipator_sum(channels, space) -> Superoperator:
    total = Superoperator.zero(space)
    for c, rate in channels:
        if c.space != space:
            raise InvalidDimensionError(f"jump operator space {c.space} does not match {space}")
        total = total + lindblad_dissipator(c, rate)
    return total


def hamiltonian_superoperator(H: Operator) -> Superoperator:
    """``-i[H, .]`` in column-stacked form."""
    I = _identity(H.space.total)
    Hm = H.matrix
    return Superoperator(H.space, -1j * (sp.kron(I, Hm, format="csr") - sp.kron(Hm.T, I, format="csr")))


class TimeDependentGenerator:
    """Matrix-free right-hand side ``rho -> -i[H(t), rho] + D(rho)``.

    Never assembles ``H(t)`` as a superoperator; the static dissipative part
    is kept as a sparse superoperator.
    """

    def __init__(self, hamiltonian: TimeDependentHamiltonian, dissipator: Superoperator):
        if hamiltonian.space != dissipator.space:
            raise InvalidDimensionError("Hamiltonian and dissipator spaces differ")
        self.space = hamiltonian.space
        self.hamiltonian = hamiltonian
        self.dissipator = dissipator

    @property
    def fastest_frequency(self) -> float:
        return float(np.abs(self.hamiltonian.omegas).max(initial=0.0))

    @property
    def step_frequency(self) -> float:
        return self.hamiltonian.step_frequency

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        D = self.space.total
        X = y.reshape(D, D)  # rho^T, C-contiguous view of the column-stacked vector
        H = self.hamiltonian.matrix_at(t)
        # H is Hermitian by construction, so H^T = conj(H) and rho H = (conj(H) rho^T)^T
        Hc = sp.csr_matrix((H.data.conj(), H.indices, H.indptr), shape=H.shape)
        comm = H @ np.ascontiguousarray(X.T) - (Hc @ X).T
        return (-1j * comm).ravel(order="F") + self.dissipator.matrix @ y


def build_liouvillian(H, channels: Iterable[tuple[Operator, float]], space: SpaceSpec, herm_tol: float = 1e-10):
    """Full Lindblad generator.

    Parameters
    ----------
    H : Operator or TimeDependentHamiltonian
        Static Hamiltonian, or the time-dependent full model.
    channels : iterable of (jump operator, rate)
    space : SpaceSpec

    Returns
    -------
    Superoperator for static ``H``; a :class:`TimeDependentGenerator` otherwise.
    """
    channels = list(channels)
    dissipator = _dissipator_sum(channels, space)
    if isinstance(H, TimeDependentHamiltonian):
        if H.space != space:
            raise InvalidDimensionError(f"Hamiltonian space {H.space} does not match {space}")
        return TimeDependentGenerator(H, dissipator)
    if H.space != space:
        raise InvalidDimensionError(f"Hamiltonian space {H.space} does not match {space}")
    if not H.is_hermitian(herm_tol):
        raise InvalidHamiltonianError(f"Hamiltonian is not Hermitian to {herm_tol:g}")
    return hamiltonian_superoperator(H) + dissipator


def lab_frame_generator(params: SystemParams, space: SpaceSpec) -> Superoperator:
    """Effective Hamiltonian with atomic decay and the thermal motional reservoir."""
    H = effective_hamiltonian(params.drives, space)
    return build_liouvillian(H, atomic_channels(params, space) + thermal_channels(params, space), space)


def squeezed_frame_generator(params: SystemParams, squeeze: SqueezeParams, space: SpaceSpec) -> Superoperator:
    """Beam-splitter Hamiltonian with atomic decay only (no thermal reservoir)."""
    H = transformed_hamiltonian(params.drives, squeeze, space)
    return build_liouvillian(H, atomic_channels(params, space), space)


def engineered_generator(params: SystemParams, space: SpaceSpec) -> Superoperator:
    """Effective Hamiltonian with atomic decay only; the thermal reservoir is left out.

    Shares the block structure of :func:`lab_frame_generator` and factorises
    with little fill, which makes it a good steady-state preconditioner.
    """
    H = effective_hamiltonian(params.drives, space)
    return build_liouvillian(H, atomic_channels(params, space), space)


def full_model_generator(params: SystemParams, space: SpaceSpec) -> TimeDependentGenerator:
    H = full_hamiltonian(params, space)
    return build_liouvillian(H, atomic_channels(params, space) + thermal_channels(params, space), space)


def engineered_rate(lam: float, Gamma: float) -> float:
    """Effective engineered decay rate ``4 |lambda|^2 / Gamma``."""
    if not Gamma > 0:
        raise InvalidArgumentError(f"Gamma must be > 0, got {Gamma!r}")
    return 4.0 * abs(lam) ** 2 / Gamma


def to_physical_rate(value_per_lambda: float, lambda_hz: float) -> float:
    """Convert a rate in units of lambda to Hz, given lambda in Hz."""
    return value_per_lambda * lambda_hz


def to_physical_time(value_inv_lambda: float, lambda_hz: float) -> float:
    return value_inv_lambda / lambda_hz
