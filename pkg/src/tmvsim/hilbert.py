"""Truncated Fock-space and three-level-atom operator algebra.

The composite space is always ordered ``(a, b, atom)``: mode ``a`` (motion
along x), mode ``b`` (motion along y), then the V-type atom with levels
``|0>, |1>, |2>``.  The order is not configurable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, InvalidDimensionError, InvalidIndexError

FACTORS = ("a", "b", "atom")
ATOM_DIM = 3

TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-10
EIGEN_FLOOR = -1e-8


@dataclass(frozen=True)
class SpaceSpec:
    """Truncation of the two motional modes; the atom is always 3-level."""

    dim_a: int = 18
    dim_b: int = 18
    dim_atom: int = ATOM_DIM

    def __post_init__(self):
        for name in ("dim_a", "dim_b"):
            d = getattr(self, name)
            if int(d) != d or d < 2:
                raise InvalidDimensionError(f"{name} must be an integer >= 2, got {d!r}")
        if self.dim_atom != ATOM_DIM:
            raise InvalidDimensionError("the atom factor is fixed to 3 levels")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.dim_a, self.dim_b, self.dim_atom)

    @property
    def mode_dims(self) -> tuple[int, int]:
        return (self.dim_a, self.dim_b)

    @property
    def total(self) -> int:
        return self.dim_a * self.dim_b * self.dim_atom

    def factor_dim(self, which: str) -> int:
        return self.dims[_factor_index(which)]


def _factor_index(which: str) -> int:
    try:
        return FACTORS.index(which)
    except ValueError:
        raise InvalidArgumentError(f"unknown factor {which!r}; expected one of {FACTORS}") from None


class Operator:
    """Sparse operator on a :class:`SpaceSpec`.

    Thin wrapper around a CSR matrix that remembers which space it was built
    against, so that operators from different truncations are never mixed.
    """

    __slots__ = ("space", "matrix")

    def __init__(self, space: SpaceSpec, matrix):
        m = sp.csr_matrix(matrix, dtype=complex)
        D = space.total
        if m.shape != (D, D):
            raise InvalidDimensionError(f"operator shape {m.shape} does not match space dimension {D}")
        self.space = space
        self.matrix = m

    def _check(self, other: "Operator"):
        if not isinstance(other, Operator):
            return NotImplemented
        if other.space != self.space:
            raise InvalidDimensionError(f"space mismatch: {self.space} vs {other.space}")
        return None

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.space, self.matrix / scalar)

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        diff = self.matrix - self.matrix.conj().T
        return diff.nnz == 0 or float(np.abs(diff.data).max()) <= tol

    def __repr__(self):
        return f"Operator(dims={self.space.dims}, nnz={self.matrix.nnz})"


class DensityState:
    """Trace-one Hermitian positive-semidefinite matrix on the full space.

    Construction validates the invariants; pass ``check=False`` only for
    intermediate results that are validated elsewhere.
    """

    __slots__ = ("space", "matrix")

    def __init__(self, space: SpaceSpec, matrix, check: bool = True):
        m = np.asarray(matrix.toarray() if sp.issparse(matrix) else matrix, dtype=complex)
        D = space.total
        if m.shape != (D, D):
            raise InvalidDimensionError(f"density matrix shape {m.shape} does not match space dimension {D}")
        self.space = space
        self.matrix = m
        if check:
            validate_density_matrix(m)

    def modes(self) -> np.ndarray:
        """Reduced state on ``a (x) b`` with the atom traced out."""
        return partial_trace(self, ("a", "b"))

    def __repr__(self):
        return f"DensityState(dims={self.space.dims})"


def validate_density_matrix(m, trace_tol=TRACE_TOL, herm_tol=HERMITIAN_TOL, eig_floor=EIGEN_FLOOR):
    """Raise ``NumericalIntegrityError`` if ``m`` is not a valid density matrix."""
    from .errors import NumericalIntegrityError

    tr = np.trace(m)
    if abs(tr - 1) > trace_tol:
        raise NumericalIntegrityError(f"trace {tr:.3e} differs from 1 by more than {trace_tol:g}")
    herm = np.abs(m - m.conj().T).max()
    if herm > herm_tol:
        raise NumericalIntegrityError(f"Hermiticity violation {herm:.3e} > {herm_tol:g}")
    lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
    if lo < eig_floor:
        raise NumericalIntegrityError(f"negative eigenvalue {lo:.3e} below floor {eig_floor:g}")


def annihilation(dim: int) -> sp.csr_matrix:
    """Truncated ladder operator with ``<n-1|a|n> = sqrt(n)``."""
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"Fock dimension must be an integer >= 2, got {dim!r}")
    return sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, shape=(dim, dim), format="csr", dtype=complex)


def atomic_sigma(l: int, m: int) -> sp.csr_matrix:
    """Atomic transition operator ``|l><m|`` on the 3-level atom."""
    for idx in (l, m):
        if idx not in (0, 1, 2):
            raise InvalidIndexError(f"atomic level index must be 0, 1 or 2, got {idx!r}")
    return sp.csr_matrix(([1.0 + 0j], ([l], [m])), shape=(ATOM_DIM, ATOM_DIM))


def embed(factor_matrix, which: str, space: SpaceSpec) -> Operator:
    """Place a single-factor matrix into the full space, identities elsewhere."""
    k = _factor_index(which)
    X = sp.csr_matrix(factor_matrix, dtype=complex)
    d = space.dims[k]
    if X.shape != (d, d):
        raise InvalidDimensionError(f"factor {which!r} has dimension {d}, got matrix of shape {X.shape}")
    parts = [sp.identity(n, dtype=complex, format="csr") for n in space.dims]
    parts[k] = X
    out = parts[0]
    for p in parts[1:]:
        out = sp.kron(out, p, format="csr")
    return Operator(space, out)


def identity(space: SpaceSpec) -> Operator:
    return Operator(space, sp.identity(space.total, dtype=complex, format="csr"))


def mode_operator(space: SpaceSpec, mode: str) -> Operator:
    """Annihilation operator of mode ``"a"`` or ``"b"`` on the full space."""
    if mode not in ("a", "b"):
        raise InvalidArgumentError(f"mode must be 'a' or 'b', got {mode!r}")
    return embed(annihilation(space.factor_dim(mode)), mode, space)


def sigma(space: SpaceSpec, l: int, m: int) -> Operator:
    return embed(atomic_sigma(l, m), "atom", space)


def partial_trace(rho, keep: Iterable[str], dims: Sequence[int] | None = None) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    Parameters
    ----------
    rho : DensityState or ndarray
        State on the full space.  A bare array needs ``dims``; the factor
        names are then ``FACTORS[:len(dims)]``.
    keep : iterable of str
        Factors to keep, returned in canonical ``(a, b, atom)`` order.
    dims : sequence of int, optional
        Factor dimensions when ``rho`` is an array.
    """
    if isinstance(rho, DensityState):
        m, dims = rho.matrix, rho.space.dims
    else:
        m = np.asarray(rho)
        if dims is None:
            raise InvalidArgumentError("dims is required when rho is a bare array")
    dims = tuple(int(d) for d in dims)
    names = FACTORS[: len(dims)]
    keep = set(keep)
    if not keep:
        raise InvalidArgumentError("keep must name at least one factor")
    unknown = keep - set(names)
    if unknown:
        raise InvalidArgumentError(f"unknown factors {sorted(unknown)}")
    n = len(dims)
    if m.shape != (int(np.prod(dims)),) * 2:
        raise InvalidDimensionError(f"matrix shape {m.shape} does not match dims {dims}")

    letters = "abcdefghijklmnop"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    out_row, out_col = [], []
    for i, name in enumerate(names):
        if name in keep:
            out_row.append(row[i])
            out_col.append(col[i])
        else:
            col[i] = row[i]
    spec = "".join(row) + "".join(col) + "->" + "".join(out_row) + "".join(out_col)
    reduced = np.einsum(spec, m.reshape(dims + dims))
    kept = int(np.prod([d for d, name in zip(dims, names) if name in keep]))
    return reduced.reshape(kept, kept)


def thermal_state(n_bar: float, dim: int) -> np.ndarray:
    """Diagonal thermal (Bose-Einstein) state, renormalised on the truncated basis."""
    if n_bar < 0 or not np.isfinite(n_bar):
        raise InvalidArgumentError(f"n_bar must be a finite number >= 0, got {n_bar!r}")
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"Fock dimension must be an integer >= 2, got {dim!r}")
    p = np.zeros(dim)
    if n_bar == 0:
        p[0] = 1.0
    else:
        n = np.arange(dim)
        # log form avoids under/overflow at large n
        p = np.exp(n * np.log(n_bar) - (n + 1) * np.log1p(n_bar))
        p /= p.sum()
    return np.diag(p).astype(complex)


def atom_projector(level: int) -> np.ndarray:
    return atomic_sigma(level, level).toarray()


def product_state(space: SpaceSpec, rho_a, rho_b, rho_atom) -> DensityState:
    m = np.kron(np.kron(np.asarray(rho_a), np.asarray(rho_b)), np.asarray(rho_atom))
    return DensityState(space, m)


def initial_state(space: SpaceSpec, n_init: float) -> DensityState:
    """Atom in ``|0>``, both modes thermal with mean ``n_init``."""
    return product_state(
        space,
        thermal_state(n_init, space.dim_a),
        thermal_state(n_init, space.dim_b),
        atom_projector(0),
    )


def expectation(op: Operator, rho):
    """``Tr(op rho)``; returned as a float when ``op`` is Hermitian."""
    if isinstance(rho, DensityState):
        if rho.space != op.space:
            raise InvalidDimensionError(f"space mismatch: {op.space} vs {rho.space}")
        m = rho.matrix
    else:
        m = np.asarray(rho)
        if m.shape != op.matrix.shape:
            raise InvalidDimensionError(f"shape mismatch: {op.matrix.shape} vs {m.shape}")
    # Tr(A rho) = sum_ij A_ij rho_ji
    A = op.matrix.tocoo()
    val = complex(np.sum(A.data * m[A.col, A.row]))
    if op.is_hermitian():
        return val.real
    return val


def fock_leakage(rho, dims: Sequence[int] | None = None, levels: int = 2) -> float:
    """Largest population held by the top ``levels`` Fock states of either mode."""
    if isinstance(rho, DensityState):
        m, dims = rho.matrix, rho.space.dims
    else:
        m = np.asarray(rho)
    out = 0.0
    for mode in ("a", "b"):
        red = partial_trace(m, (mode,), dims)
        out = max(out, float(np.real(np.trace(red[-levels:, -levels:]))))
    return out
