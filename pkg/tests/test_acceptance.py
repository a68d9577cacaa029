"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a ``CRITERION n: PASS/FAIL`` line that is printed in the
pytest terminal summary.  Criteria that the physics does not support are left
failing; see the project decision log for the analysis.
"""

import math
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from helpers import coherent_ket, random_density

from tmvsim.dynamics import EvolveConfig, evolve, steady_state, trace_distance
from tmvsim.hilbert import SpaceSpec, initial_state, partial_trace
from tmvsim.model import (
    SystemParams,
    conjugation_residual,
    engineered_generator,
    lab_frame_generator,
    squeezed_frame_generator,
    thermal_liouvillian,
    vec,
)
from tmvsim.observables import DuanConfig, duan_total_variance
from tmvsim.runner import run
from tmvsim.runner.config import load_scenario, load_sweep
from tmvsim.states import DriveSet, SqueezeParams, fidelity_to_tmvs

pytestmark = pytest.mark.slow

SINH2 = math.sinh(1.0) ** 2
DUAN_R1 = 2 * math.exp(-2.0)


def report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def figure_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("figures")
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run.run_scenario(load_scenario(name), out, plot=False).trajectory
        return cache[name]

    return get


def test_criterion_1_ideal_steady_state():
    params = SystemParams.reference_regime(r=1.0, gamma=0.0, Gamma=10.0)
    space = SpaceSpec(18, 18)
    t0 = time.perf_counter()
    rho = steady_state(lab_frame_generator(params, space), preconditioner=engineered_generator(params, space))
    wall = time.perf_counter() - t0
    fid = fidelity_to_tmvs(rho.modes(), SqueezeParams(1.0, 0.0))
    ground = partial_trace(rho, ("atom",))[0, 0].real
    ok = fid > 0.999 and ground > 0.999 and wall < 60
    assert report(1, ok, f"fidelity {fid:.12f} > 0.999, ground {ground:.12f} > 0.999, {wall:.1f} s < 60 s")


def test_criterion_2_fig2_asymptotes(figure_runs):
    finals = {g: figure_runs(f"fig2-gamma-{g:g}").final("mean_quanta_a") for g in (0.001, 0.01, 0.1)}
    rel = {g: abs(v - SINH2) / SINH2 for g, v in finals.items()}
    ok = rel[0.001] < 0.05 and rel[0.01] < 0.15 and rel[0.1] > 0.15
    detail = ", ".join(f"gamma {g:g}: <n_a> = {finals[g]:.5f} ({100 * rel[g]:.1f}%)" for g in finals)
    assert report(2, ok, f"{detail}; need <5%, <15%, >15% from {SINH2:.4f}")


def test_criterion_3_fig3_asymptote(figure_runs):
    traj = figure_runs("fig3-gamma-0.001")
    var = traj.final("duan_variance")
    rel = abs(var - DUAN_R1) / DUAN_R1
    # the witness at epsilon = 1 compares the trajectory's EPR variance with 2
    margin = DuanConfig().threshold - var
    entangled = margin > 0
    ok = rel < 0.05 and entangled and margin > 1.5
    assert report(3, ok, f"variance {var:.5f} vs {DUAN_R1:.4f} ({100 * rel:.1f}%, need <5%); "
                         f"witness {'true' if entangled else 'false'}, margin {margin:.4f} (need >1.5)")


def test_criterion_4_engineered_rate(tmp_path):
    spec = load_sweep("engineered-rate-sweep")
    res = run.run_sweep(spec, tmp_path, plot=False)
    k10, k20 = res.values()
    ratio = k10 / k20
    # NaN rows (failed fits) compare False and so count as failures
    rate_ok = abs(k10 - 0.4) / 0.4 < 0.25
    ratio_ok = abs(ratio - 2.0) / 2.0 < 0.25
    errors = "; ".join(f"row {r['value']:g}: {r['error']}" for r in res.rows if r["status"] != "ok")
    assert report(4, rate_ok and ratio_ok and not errors,
                  f"fitted rate at Gamma 10: {k10:.4f} vs 0.4 ({'ok' if rate_ok else 'outside 25%'}); "
                  f"Gamma 10/20 ratio {ratio:.3f} vs 2 ({'ok' if ratio_ok else 'outside 25%'})"
                  + (f"; {errors}" if errors else ""))


def test_criterion_5_transformed_frame():
    drives = DriveSet.for_squeezing(1.0, 0.0, 1.0)
    sq = SqueezeParams(1.0, 0.0)
    space = SpaceSpec(18, 18)
    resid = conjugation_residual(drives, sq, space)
    L = squeezed_frame_generator(SystemParams.reference_regime(r=1.0, gamma=0.0), sq, space)
    rho = np.zeros((space.total, space.total))
    rho[0, 0] = 1.0
    dark = float(np.abs(L.matrix @ vec(rho)).max())
    ok = resid < 1e-6 and dark < 1e-10
    assert report(5, ok, f"conjugation residual {resid:.2e} < 1e-6, dark-state residual {dark:.2e} < 1e-10")


def test_criterion_6_rwa_validity(tmp_path):
    cfg = load_scenario("rwa-audit")
    rows, passed = run.validate_scenario(cfg, tmp_path, plot=False)
    devs = [r["max_trace_distance"] for r in rows]
    monotone = all(a > b for a, b in zip(devs, devs[1:]))
    bound = cfg.validate["bound"]
    ok = monotone and devs[-1] < bound
    table = ", ".join(f"{r['nu_over_lambda']:g}: {r['max_trace_distance']:.4f}" for r in rows)
    assert passed == ok
    assert report(6, ok, f"trace distance by nu/eta Omega {{{table}}}, monotone {monotone}, "
                         f"last < {bound}")


def test_criterion_7_algebra_suite():
    rng = np.random.default_rng(2024)
    checks = {}

    s = SpaceSpec(4, 3)
    L = lab_frame_generator(SystemParams.reference_regime(gamma=0.2, n_th=0.5), s)
    checks["trace preservation"] = max(abs(np.trace(L.apply(random_density(rng, s.total)))) for _ in range(100)) < 1e-12

    s3 = SpaceSpec(3, 3)
    w = np.linalg.eigvals(lab_frame_generator(SystemParams.reference_regime(r=0.5, gamma=0.1), s3).matrix.toarray())
    checks["null eigenvalue"] = np.abs(w).min() < 1e-10

    s10 = SpaceSpec(10, 10)
    p_th = SystemParams(DriveSet(0, 0, 0, 0), gamma_a=0.1, gamma_b=0.1, n_th=0.5)
    rho_th = steady_state(lab_frame_generator(p_th, s10))
    pa = np.diag(partial_trace(rho_th, ("a",))).real
    checks["detailed balance 1/3"] = np.allclose(pa[1:] / pa[:-1], 1 / 3, rtol=1e-9)
    checks["thermal liouvillian trace"] = thermal_liouvillian(p_th, s10).trace_defect() < 1e-12

    sat = []
    for _ in range(20):
        alpha, beta = rng.normal(scale=0.7, size=2) + 1j * rng.normal(scale=0.7, size=2)
        eps = rng.uniform(0.5, 2.0)
        psi = np.kron(coherent_ket(alpha, 40), coherent_ket(beta, 40))
        cfg = DuanConfig(eps)
        sat.append(abs(duan_total_variance(np.outer(psi, psi.conj()), cfg) - cfg.threshold))
    checks["Duan saturation"] = max(sat) < 1e-8

    s5 = SpaceSpec(5, 5)
    L5 = lab_frame_generator(SystemParams.reference_regime(gamma=0.1), s5)
    tr = evolve(initial_state(s5, 0.5), L5, EvolveConfig.uniform(150.0, 3), keep_states=True)
    checks["evolve vs steady"] = trace_distance(tr.states[-1], steady_state(L5)) < 1e-4

    ok = all(checks.values())
    assert report(7, ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))


def test_criterion_8_determinism(tmp_path):
    cfg = load_scenario("rwa-audit")
    a = run.run_scenario(cfg, tmp_path / "a", plot=False).csv_path.read_bytes()
    b = run.run_scenario(cfg, tmp_path / "b", plot=False).csv_path.read_bytes()
    assert report(8, a == b, f"two runs of the built-in '{cfg.name}': {len(a)} bytes, identical {a == b}")
