import math

import numpy as np
import pytest
from helpers import random_density
from hypothesis import given
from hypothesis import strategies as st

from tmvsim.errors import InconsistentDrivesError, InvalidArgumentError, InvalidHamiltonianError
from tmvsim.hilbert import Operator, SpaceSpec, mode_operator, sigma
from tmvsim.model import (
    SystemParams,
    Superoperator,
    atomic_channels,
    build_liouvillian,
    conjugation_residual,
    effective_hamiltonian,
    engineered_rate,
    full_hamiltonian,
    full_hamiltonian_at,
    lab_frame_generator,
    lindblad_dissipator,
    squeezed_couplings,
    squeezed_frame_generator,
    thermal_channels,
    thermal_liouvillian,
    to_physical_rate,
    transformed_hamiltonian,
    unvec,
    vec,
)
from tmvsim.states import DriveSet, SqueezeParams, solve_squeeze_params

S3 = SpaceSpec(3, 3)
S4 = SpaceSpec(4, 3)

complexes = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)


def test_system_params_validation():
    d = DriveSet.for_squeezing(1.0)
    with pytest.raises(InvalidArgumentError):
        SystemParams(d, Gamma_1=-1)
    with pytest.raises(InvalidArgumentError):
        SystemParams(d, eta={"1x": 0.1, "1y": 0.1, "2x": 0.1, "2y": 1.5})
    p = SystemParams.reference_regime().with_trap(30.0, 40.0)
    p.check_resonance()
    assert p.detunings() == {"1x": -30.0, "2x": 30.0, "1y": 40.0, "2y": -40.0}
    assert p.rabi()["1x"] == pytest.approx(1 / (0.1j))
    from dataclasses import replace

    with pytest.raises(InvalidArgumentError):
        replace(p, delta_1x=-29.0).check_resonance()
    with pytest.raises(InvalidArgumentError):
        SystemParams.reference_regime().check_resonance()


def test_effective_hamiltonian_elements():
    assert effective_hamiltonian(DriveSet(0, 0, 0, 0), S4).matrix.nnz == 0
    H = effective_hamiltonian(DriveSet(1.0, 0, 0, 0), S4).toarray()

    def idx(na, nb, at):
        return (na * 3 + nb) * 3 + at

    for n in range(1, 4):
        for m in range(3):
            assert H[idx(n - 1, m, 1), idx(n, m, 0)] == pytest.approx(math.sqrt(n))
    assert np.count_nonzero(H) == 2 * 3 * 3


@given(complexes, complexes, complexes, complexes)
def test_effective_hamiltonian_hermitian(l1x, l1y, l2x, l2y):
    H = effective_hamiltonian(DriveSet(l1x, l1y, l2x, l2y), S3).toarray()
    assert np.abs(H - H.conj().T).max() == 0


def test_squeezed_couplings_fig_regime(frozen):
    d = DriveSet.for_squeezing(1.0)
    la, lb = squeezed_couplings(d, SqueezeParams(1.0))
    assert la == pytest.approx(frozen["sech_r1"], abs=1e-14)
    assert lb == pytest.approx(frozen["sech_r1"], abs=1e-14)


@given(r=st.floats(0, 2), phi=st.floats(-3, 3), mag=st.floats(0.1, 3), arg=st.floats(-3, 3))
def test_squeezed_coupling_magnitude(r, phi, mag, arg):
    d = DriveSet.for_squeezing(r, phi, mag * np.exp(1j * arg))
    p = solve_squeeze_params(d)
    la, lb = squeezed_couplings(d, p)
    assert abs(la) == pytest.approx(mag / math.cosh(r), rel=1e-9)
    assert abs(lb) == pytest.approx(mag / math.cosh(r), rel=1e-9)


def test_transformed_hamiltonian_reduces_at_r0():
    d = DriveSet(0.8, 0, 0, 1.3)
    np.testing.assert_allclose(transformed_hamiltonian(d, SqueezeParams(0), S4).toarray(),
                               effective_hamiltonian(d, S4).toarray())
    with pytest.raises(InconsistentDrivesError):
        transformed_hamiltonian(DriveSet.for_squeezing(1.0), SqueezeParams(0.5), S4)


def test_conjugation_identity_interior():
    d = DriveSet.for_squeezing(0.6, 0.4, 1.0 + 0.5j)
    assert conjugation_residual(d, solve_squeeze_params(d), SpaceSpec(7, 7)) < 1e-6


def test_full_hamiltonian_terms_at_t0():
    p = SystemParams(DriveSet(1.0, 0, 0, 0)).with_trap(50.0)
    H = full_hamiltonian_at(0.0, p, S4).toarray()
    omega = p.rabi()["1x"]
    a = mode_operator(S4, "a")
    s10 = sigma(S4, 1, 0)
    up = omega * s10 + 1j * 0.1 * omega * ((a + a.dag()) @ s10)
    np.testing.assert_allclose(H, (up + up.dag()).toarray(), atol=1e-14)


@given(st.floats(0, 10))
def test_full_hamiltonian_hermitian(t):
    p = SystemParams.reference_regime(phi=0.3).with_trap(20.0, 27.0)
    H = full_hamiltonian_at(t, p, S3).toarray()
    assert np.abs(H - H.conj().T).max() < 1e-12


def test_full_hamiltonian_time_average():
    p = SystemParams(DriveSet.for_squeezing(1.0, 0.5, 0.7 - 0.2j)).with_trap(25.0)
    H = full_hamiltonian(p, S3)
    T = 2 * math.pi / 25.0
    n = 64
    avg = sum(H.at(k * T / n).toarray() for k in range(n)) / n
    np.testing.assert_allclose(avg, effective_hamiltonian(p.drives, S3).toarray(), atol=1e-10)
    np.testing.assert_allclose(H.stationary_part(1e-9).toarray(), effective_hamiltonian(p.drives, S3).toarray(),
                               atol=1e-12)


def test_lindblad_dissipator_two_level_decay():
    L = lindblad_dissipator(sigma(S3, 0, 1), 2.5)
    rho = np.zeros((S3.total, S3.total))
    rho[1, 1] = 1  # |0,0,1>
    out = L.apply(rho)
    expect = np.zeros_like(rho)
    expect[0, 0], expect[1, 1] = 2.5, -2.5
    np.testing.assert_allclose(out, expect, atol=1e-15)
    assert lindblad_dissipator(sigma(S3, 0, 1), 0).matrix.nnz == 0
    with pytest.raises(InvalidArgumentError):
        lindblad_dissipator(sigma(S3, 0, 1), -1)


def test_vectorization_matches_direct_formula():
    rng = np.random.default_rng(7)
    p = SystemParams.reference_regime(gamma=0.3, n_th=0.5)
    H = effective_hamiltonian(p.drives, S4).toarray()
    chans = atomic_channels(p, S4) + thermal_channels(p, S4)
    L = lab_frame_generator(p, S4)
    for _ in range(5):
        rho = random_density(rng, S4.total)
        direct = -1j * (H @ rho - rho @ H)
        for c, rate in chans:
            C = c.toarray()
            cdc = C.conj().T @ C
            direct += rate * (C @ rho @ C.conj().T - 0.5 * (cdc @ rho + rho @ cdc))
        assert np.abs(L.apply(rho) - direct).max() < 1e-12
        np.testing.assert_allclose(unvec(vec(rho), S4.total), rho)


def test_trace_preservation_random_states():
    rng = np.random.default_rng(11)
    L = lab_frame_generator(SystemParams.reference_regime(gamma=0.2, n_th=0.5), S4)
    assert L.trace_defect() < 1e-12
    for _ in range(100):
        rho = random_density(rng, S4.total)
        assert abs(np.trace(L.apply(rho))) < 1e-12


def test_generator_has_physical_null_vector():
    L = lab_frame_generator(SystemParams.reference_regime(r=0.5, gamma=0.1, n_th=0.5), S3).matrix.toarray()
    w, V = np.linalg.eig(L)
    k = np.argmin(np.abs(w))
    assert abs(w[k]) < 1e-10
    rho = unvec(V[:, k], S3.total)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    assert np.linalg.eigvalsh(rho).min() > -1e-8


def test_build_liouvillian_checks():
    assert build_liouvillian(Operator(S3, np.zeros((27, 27))), [], S3).matrix.nnz == 0
    bad = np.zeros((27, 27), dtype=complex)
    bad[0, 1] = 1
    with pytest.raises(InvalidHamiltonianError):
        build_liouvillian(Operator(S3, bad), [], S3)


def test_transformed_frame_vacuum_is_dark():
    p = SystemParams.reference_regime(r=1.0)
    L = squeezed_frame_generator(p, SqueezeParams(1.0), SpaceSpec(6, 6))
    rho = np.zeros((108, 108))
    rho[0, 0] = 1
    assert np.abs(L.matrix @ vec(rho)).max() < 1e-10


def test_thermal_liouvillian_structure(frozen):
    p = SystemParams(DriveSet(0, 0, 0, 0), gamma_a=0.1, gamma_b=0.1, n_th=0.5)
    s = SpaceSpec(10, 10)
    L = thermal_liouvillian(p, s)
    assert L.trace_defect() < 1e-12
    # the diagonal of a single mode obeys a birth-death chain
    from tmvsim.hilbert import partial_trace, product_state, thermal_state, atom_projector

    geo = thermal_state(0.5, 10)
    rho = product_state(s, geo, geo, atom_projector(0))
    assert np.abs(L.apply(rho)).max() < 1e-14
    pa = np.diag(partial_trace(rho, ("a",))).real
    np.testing.assert_allclose(pa[1:] / pa[:-1], frozen["detailed_balance_ratio_n05"], rtol=1e-12)
    p0 = SystemParams(DriveSet(0, 0, 0, 0), gamma_a=0.1, gamma_b=0.1, n_th=0.0)
    vac = product_state(s, thermal_state(0, 10), thermal_state(0, 10), atom_projector(0))
    assert np.abs(thermal_liouvillian(p0, s).apply(vac)).max() == 0


def test_block_labels_cover_trace_block():
    L = lab_frame_generator(SystemParams.reference_regime(gamma=0.1, n_th=0.5), S4)
    D = S4.total
    diag = np.arange(D) * (D + 1)
    labels = L.block_labels()
    assert np.unique(labels[diag]).size == 1
    closure = L.support_closure(diag[:1])
    assert set(diag) <= set(closure)
    assert closure.size < D * D


def test_superoperator_arithmetic():
    L = lindblad_dissipator(sigma(S3, 0, 1), 1.0)
    assert np.abs((2 * L).matrix - (L + L).matrix).max() == 0
    assert Superoperator.zero(S3).matrix.nnz == 0


def test_engineered_rate(frozen):
    assert engineered_rate(1.0, 10.0) == pytest.approx(frozen["engineered_rate_l1_G10"])
    assert engineered_rate(0.0, 10.0) == 0
    assert to_physical_rate(engineered_rate(1.0, 10.0), 100e3) == pytest.approx(frozen["engineered_rate_khz"] * 1e3)
    with pytest.raises(InvalidArgumentError):
        engineered_rate(1.0, 0.0)
