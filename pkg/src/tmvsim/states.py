"""Two-mode squeezing: parameter solver, squeeze operator and TMVS target state.

Convention used throughout::

    S(xi) = exp(conj(xi) a b - xi a^dag b^dag),   xi = r exp(i phi)

so that ``S^dag a S = a cosh r - e^{i phi} b^dag sinh r`` and

    S(xi)|0,0> = sum_n (-e^{i phi} tanh r)^n / cosh r |n,n>.

The sign ``(-1)^n`` in the Schmidt amplitudes follows from this convention;
at ``phi = 0`` the squeezed EPR pair is ``x_a + x_b`` and ``p_a - p_b``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import InconsistentDrivesError, InvalidArgumentError, InvalidDimensionError, NoSqueezeSolutionError
from .hilbert import ATOM_DIM, DensityState, Operator, SpaceSpec, annihilation, partial_trace


def _wrap_phase(phi: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class SqueezeParams:
    r: float
    phi: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise InvalidArgumentError(f"squeezing factor r must be finite and >= 0, got {self.r!r}")
        object.__setattr__(self, "phi", _wrap_phase(float(self.phi)))

    @property
    def xi(self) -> complex:
        return self.r * cmath.exp(1j * self.phi)

    @property
    def mean_quanta(self) -> float:
        """Per-mode occupation of the ideal state, ``sinh^2 r``."""
        return math.sinh(self.r) ** 2

    @property
    def duan_variance(self) -> float:
        """Ideal EPR total variance ``2 exp(-2r)`` (epsilon = 1)."""
        return 2.0 * math.exp(-2.0 * self.r)


@dataclass(frozen=True)
class DriveSet:
    """Effective sideband couplings ``lambda_{j alpha} = i eta_{j alpha} Omega_{j alpha}``.

    The couplings are complex; the drive phases are carried by them.
    """

    lambda_1x: complex
    lambda_1y: complex
    lambda_2x: complex
    lambda_2y: complex

    @classmethod
    def from_fields(cls, eta: dict, rabi: dict, phase: dict) -> "DriveSet":
        """Build couplings from Lamb-Dicke parameters, Rabi frequencies and phases.

        Each argument maps ``"1x", "1y", "2x", "2y"`` to a real number.
        """
        lam = {k: 1j * eta[k] * rabi[k] * cmath.exp(1j * phase[k]) for k in ("1x", "1y", "2x", "2y")}
        return cls(lam["1x"], lam["1y"], lam["2x"], lam["2y"])

    @classmethod
    def for_squeezing(cls, r: float, phi: float = 0.0, coupling: complex = 1.0) -> "DriveSet":
        """Symmetric couplings that produce squeezing ``(r, phi)``.

        ``lambda_1x = lambda_2y = coupling`` and
        ``lambda_1y = lambda_2x = coupling * tanh(r) * exp(i phi)``.
        """
        cross = coupling * math.tanh(r) * cmath.exp(1j * phi)
        return cls(coupling, cross, cross, coupling)

    def as_dict(self) -> dict:
        return {
            "lambda_1x": self.lambda_1x,
            "lambda_1y": self.lambda_1y,
            "lambda_2x": self.lambda_2x,
            "lambda_2y": self.lambda_2y,
        }

    def drive_phases(self) -> dict:
        """Drive phases ``phi_{j alpha}`` assuming real positive Lamb-Dicke parameters."""
        return {k[-2:]: _wrap_phase(cmath.phase(v) - math.pi / 2) for k, v in self.as_dict().items()}

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.as_dict().values())


def _ratio(num: complex, den: complex):
    if den == 0:
        if num == 0:
            return None
        raise NoSqueezeSolutionError("cross coupling without a primary coupling: ratio is infinite")
    return num / den


def solve_squeeze_params(drives: DriveSet, tol: float = 1e-9) -> SqueezeParams:
    """Squeezing ``(r, phi)`` that removes the cross terms of the effective Hamiltonian.

    Solves ``lambda_1y cosh r = e^{i phi} lambda_1x sinh r`` and
    ``lambda_2x cosh r = e^{i phi} lambda_2y sinh r``, i.e.
    ``tanh r = |lambda_1y / lambda_1x| = |lambda_2x / lambda_2y|`` and
    ``phi = arg(lambda_1y / lambda_1x) = arg(lambda_2x / lambda_2y)``.

    Raises
    ------
    NoSqueezeSolutionError
        If a ratio magnitude is >= 1.
    InconsistentDrivesError
        If the two ratios (or their phases) disagree by more than ``tol``.
    """
    ratios = [q for q in (_ratio(drives.lambda_1y, drives.lambda_1x), _ratio(drives.lambda_2x, drives.lambda_2y)) if q is not None]
    if not ratios:
        return SqueezeParams(0.0, 0.0)
    mags = [abs(q) for q in ratios]
    if max(mags) >= 1:
        raise NoSqueezeSolutionError(f"coupling ratio {max(mags):.6g} >= 1 has no real squeezing solution")
    if len(ratios) == 2:
        if abs(mags[0] - mags[1]) > tol:
            raise InconsistentDrivesError(f"coupling ratios disagree: {mags[0]:.12g} vs {mags[1]:.12g}")
        if min(mags) > tol:
            dphi = abs(_wrap_phase(cmath.phase(ratios[0]) - cmath.phase(ratios[1])))
            if dphi > tol:
                raise InconsistentDrivesError(f"squeezing phases disagree by {dphi:.3e} rad")
    tanh_r = float(np.mean(mags))
    r = math.atanh(tanh_r)
    phi = cmath.phase(ratios[0]) if tanh_r > 0 else 0.0
    params = SqueezeParams(r, phi)
    res = squeeze_residuals(drives, params)
    if max(res) > tol:
        raise InconsistentDrivesError(f"squeeze constraint residual {max(res):.3e} exceeds tolerance {tol:g}")
    return params


def squeeze_residuals(drives: DriveSet, params: SqueezeParams) -> tuple[float, float]:
    """Magnitudes of the two combinations that must vanish in the squeezed frame."""
    ch, sh = math.cosh(params.r), math.sinh(params.r)
    e = cmath.exp(1j * params.phi)
    return (
        abs(drives.lambda_1y * ch - e * drives.lambda_1x * sh),
        abs(drives.lambda_2x * ch - e * drives.lambda_2y * sh),
    )


def _mode_dims(space) -> tuple[int, int]:
    if isinstance(space, SpaceSpec):
        return space.mode_dims
    da, db = space
    return int(da), int(db)


def squeeze_sparse(params: SqueezeParams, mode_dims) -> sp.csr_matrix:
    """``S(xi)`` on ``a (x) b`` as a sparse matrix.

    The generator ``xi* ab - xi a^dag b^dag`` conserves ``n_a - n_b``, so the
    exponential splits into one dense block per chain ``|n + k, n>``; each
    block goes through scaling-and-squaring separately.
    """
    da, db = _mode_dims(mode_dims)
    xi = params.xi
    rows, cols, vals = [], [], []
    for k in range(-(db - 1), da):
        nb = np.arange(max(0, -k), min(db, da - k))
        na = nb + k
        idx = na * db + nb
        m = idx.size
        if m == 1 or xi == 0:
            rows.append(idx)
            cols.append(idx)
            vals.append(np.ones(m, dtype=complex))
            continue
        off = np.sqrt(na[1:] * nb[1:].astype(float))  # <j-1| ab |j> along the chain
        G = np.zeros((m, m), dtype=complex)
        G[np.arange(m - 1), np.arange(1, m)] = np.conj(xi) * off
        G[np.arange(1, m), np.arange(m - 1)] = -xi * off
        E = scipy.linalg.expm(G)
        r_, c_ = np.nonzero(np.abs(E) > 0)
        rows.append(idx[r_])
        cols.append(idx[c_])
        vals.append(E[r_, c_])
    n = da * db
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def squeeze_matrix(params: SqueezeParams, mode_dims) -> np.ndarray:
    """Dense ``S(xi)`` on the two-mode block ``a (x) b`` (no atom factor)."""
    return squeeze_sparse(params, mode_dims).toarray()


def headroom(r: float, level: int = 0, tol: float = 1e-12) -> int:
    """Extra Fock levels needed to squeeze states up to ``level`` without cutoff error.

    Squeezing ``|n, m>`` spreads it over levels around ``(n + m + 1) cosh 2r``
    with a tail decaying like ``tanh(r)^k``; the padding covers both.
    """
    t = math.tanh(r)
    if t == 0:
        return 0
    return int(math.ceil(level * math.cosh(2 * r) + math.log(tol) / math.log(t)))


def interior_columns(mode_dims, padded_dims, margin: int = 4) -> np.ndarray:
    """Indices in the padded ``a (x) b`` basis of states with levels <= dim - margin."""
    da, db = _mode_dims(mode_dims)
    pa, pb = _mode_dims(padded_dims)
    na, nb = np.meshgrid(np.arange(da - margin + 1), np.arange(db - margin + 1), indexing="ij")
    return (na * pb + nb).ravel()


def bogoliubov_residual(params: SqueezeParams, mode_dims, margin: int = 4, pad: int | None = None) -> float:
    """Max-norm of ``S^dag a S - (a cosh r - e^{i phi} b^dag sinh r)`` on the interior.

    The interior is the set of Fock states with both levels ``<= dim - margin``.
    ``S`` is evaluated in a truncation enlarged by :func:`headroom` so that the
    cutoff does not contaminate the interior.
    """
    da, db = _mode_dims(mode_dims)
    pad = headroom(params.r, max(da, db)) if pad is None else pad
    pd = (da + pad, db + pad)
    cols = interior_columns((da, db), pd, margin)
    SP = squeeze_sparse(params, pd)[:, cols]
    a = sp.kron(annihilation(pd[0]), sp.identity(pd[1]), format="csr")
    b = sp.kron(sp.identity(pd[0]), annihilation(pd[1]), format="csr")
    lhs = (SP.conj().T @ a @ SP).toarray()
    rhs = (a * math.cosh(params.r) - cmath.exp(1j * params.phi) * math.sinh(params.r) * b.conj().T)[cols][:, cols]
    return float(np.abs(lhs - rhs.toarray()).max())


def two_mode_squeeze_operator(params: SqueezeParams, space: SpaceSpec) -> Operator:
    """``S(xi)`` on the full space, acting as the identity on the atom.

    Truncation distorts the action on states near the cutoff; see
    :func:`bogoliubov_residual` for the interior check.
    """
    S = squeeze_sparse(params, space)
    return Operator(space, sp.kron(S, sp.identity(ATOM_DIM, format="csr"), format="csr"))


def tmvs_ket(params: SqueezeParams, space) -> np.ndarray:
    """Two-mode squeezed vacuum on ``a (x) b``, renormalised over the truncation.

    Amplitude on ``|n,n>`` is ``(-e^{i phi} tanh r)^n / cosh r``.
    """
    da, db = _mode_dims(space)
    n = np.arange(min(da, db))
    amp = (-cmath.exp(1j * params.phi) * math.tanh(params.r)) ** n / math.cosh(params.r)
    psi = np.zeros(da * db, dtype=complex)
    psi[n * db + n] = amp
    return psi / np.linalg.norm(psi)


def fidelity_to_tmvs(rho_modes, params: SqueezeParams, mode_dims=None) -> float:
    """Overlap ``<Psi|rho|Psi>`` of a two-mode state with the ideal TMVS.

    ``rho_modes`` may be a full :class:`DensityState` (the atom is traced
    out) or a density matrix on ``a (x) b``, in which case ``mode_dims`` is
    inferred for equal truncations.
    """
    if isinstance(rho_modes, DensityState):
        mode_dims = rho_modes.space.mode_dims
        m = partial_trace(rho_modes, ("a", "b"))
    else:
        m = np.asarray(rho_modes)
        if mode_dims is None:
            d = math.isqrt(m.shape[0])
            if d * d != m.shape[0]:
                raise InvalidDimensionError("cannot infer mode dimensions; pass mode_dims")
            mode_dims = (d, d)
        if m.shape != (mode_dims[0] * mode_dims[1],) * 2:
            raise InvalidDimensionError(f"matrix shape {m.shape} does not match mode dims {mode_dims}")
    psi = tmvs_ket(params, mode_dims)
    f = float(np.real(np.vdot(psi, m @ psi)))
    return min(max(f, 0.0), 1.0)
