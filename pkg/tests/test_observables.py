import math

import numpy as np
import pytest
from helpers import coherent_ket, random_density
from hypothesis import given
from hypothesis import strategies as st

from tmvsim.errors import InvalidArgumentError
from tmvsim.hilbert import SpaceSpec, expectation, initial_state, product_state, thermal_state, atom_projector
from tmvsim.observables import (
    DuanConfig,
    duan_total_variance,
    entanglement_witness,
    mean_quanta,
    min_duan_variance,
    quadratures,
)
from tmvsim.states import SqueezeParams, tmvs_ket


def _pure(psi):
    return np.outer(psi, psi.conj())


def _vacuum(d):
    m = np.zeros((d * d, d * d))
    m[0, 0] = 1
    return m


def test_quadratures_on_vacuum():
    s = SpaceSpec(6, 6)
    rho = initial_state(s, 0.0)
    xa, pa, xb, pb = quadratures(s)
    assert expectation(xa, rho) == pytest.approx(0.0)
    assert expectation(xa @ xa, rho) == pytest.approx(0.5)
    for q in (xa, pa, xb, pb):
        assert q.is_hermitian(0.0)


def test_quadrature_commutator_corner():
    s = SpaceSpec(6, 2)
    xa, pa, _, _ = quadratures(s)
    comm = (xa @ pa - pa @ xa).toarray()
    n_a = np.repeat(np.arange(6), 2 * 3)
    top = n_a == 5
    np.testing.assert_allclose(comm[np.ix_(~top, ~top)], 1j * np.eye((~top).sum()), atol=1e-14)
    assert abs(comm[np.ix_(top, top)].diagonal() - 1j).max() > 1


def test_duan_examples(frozen):
    assert duan_total_variance(_vacuum(6)) == pytest.approx(2.0, abs=1e-14)
    tm = _pure(tmvs_ket(SqueezeParams(1.0), (18, 18)))
    assert duan_total_variance(tm) == pytest.approx(frozen["tmvs_trunc18_duan"], abs=1e-12)
    assert duan_total_variance(tm) == pytest.approx(frozen["duan_tmvs_r1"], rel=2e-3)
    th = np.kron(thermal_state(0.5, 8), thermal_state(0.5, 8))
    assert duan_total_variance(th) == pytest.approx(frozen["thermal_n05_product_duan_dim8"], abs=1e-12)
    th30 = np.kron(thermal_state(0.5, 30), thermal_state(0.5, 30))
    assert duan_total_variance(th30) == pytest.approx(frozen["thermal_n05_product_duan"], abs=1e-9)


def test_duan_accepts_full_state():
    s = SpaceSpec(5, 5)
    rho = product_state(s, thermal_state(0.5, 5), thermal_state(0.5, 5), atom_projector(0))
    assert duan_total_variance(rho) == pytest.approx(duan_total_variance(rho.modes(), mode_dims=(5, 5)))


def test_duan_phase_option():
    p = SqueezeParams(0.5, 0.8)
    tm = _pure(tmvs_ket(p, (20, 20)))
    assert duan_total_variance(tm, DuanConfig(phase=0.8)) == pytest.approx(p.duan_variance, rel=1e-9)
    assert duan_total_variance(tm) > p.duan_variance + 0.1
    var, angle = min_duan_variance(tm)
    assert var == pytest.approx(p.duan_variance, rel=1e-8)
    assert angle == pytest.approx(0.8, abs=1e-4)


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        DuanConfig(0.0)
    assert DuanConfig(2.0).threshold == pytest.approx(4.25)


@given(st.complex_numbers(max_magnitude=1.5), st.complex_numbers(max_magnitude=1.5), st.floats(0.3, 3.0))
def test_duan_saturates_on_coherent_products(alpha, beta, eps):
    d = 30
    psi = np.kron(coherent_ket(alpha, d), coherent_ket(beta, d))
    cfg = DuanConfig(eps)
    assert duan_total_variance(_pure(psi), cfg) == pytest.approx(cfg.threshold, abs=1e-9)


@given(st.integers(0, 2**31 - 1), st.floats(-math.pi, math.pi), st.sampled_from([1.0, 1.7]))
def test_duan_rotation_invariance(seed, theta, eps):
    d = 4
    rho = random_density(np.random.default_rng(seed), d * d)
    n = np.arange(d)
    U = np.kron(np.diag(np.exp(-1j * theta * n)), np.diag(np.exp(1j * theta * n)))
    rot = U @ rho @ U.conj().T
    cfg = DuanConfig(eps)
    assert duan_total_variance(rot, cfg) == pytest.approx(duan_total_variance(rho, cfg), abs=1e-12)
    assert min_duan_variance(rot, eps)[0] == pytest.approx(min_duan_variance(rho, eps)[0], abs=1e-8)


@given(st.integers(0, 2**31 - 1))
def test_duan_non_negative(seed):
    rho = random_density(np.random.default_rng(seed), 16)
    assert duan_total_variance(rho) >= 0


def test_witness_examples(frozen):
    w = entanglement_witness(_pure(tmvs_ket(SqueezeParams(1.0), (24, 24))))
    assert w.entangled
    assert w.margin == pytest.approx(frozen["witness_margin_tmvs_r1"], abs=1e-4)
    v = entanglement_witness(_vacuum(5))
    assert not v.entangled and v.margin == pytest.approx(0.0, abs=1e-14)
    t = entanglement_witness(np.kron(thermal_state(0.5, 20), thermal_state(0.5, 20)))
    assert not t.entangled and t.margin < 0


def test_mean_quanta(frozen):
    assert mean_quanta(_vacuum(4), "a") == 0
    tm = _pure(tmvs_ket(SqueezeParams(1.0), (18, 18)))
    assert mean_quanta(tm, "a") == pytest.approx(frozen["tmvs_trunc18_mean"], abs=1e-12)
    assert abs(mean_quanta(tm, "a") - mean_quanta(tm, "b")) < 1e-12
    th = np.kron(thermal_state(2, 30), thermal_state(0, 30))
    assert mean_quanta(th, "a") == pytest.approx(frozen["thermal_n2_dim30_mean"], abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        mean_quanta(th, "c")
