"""Acceptance checks, one test per check. Each prints a single PASS/FAIL line."""

import time

import numpy as np
import pytest

from qsync import rng as crng
from qsync.density import evolve_density
from qsync.experiments import (
    _trajectory_config,
    initial_density,
    observables_from_density,
    oracle_density,
    preset_spec,
    results_to_csv,
    run_preset,
)
from qsync.lindblad import encoded_model, lindblad_rhs, spin_model, trotter_error_scan
from qsync.noise import NoiseParams, readout_confusion
from qsync.spin1 import (
    DissipationStyle,
    SpinEncoding,
    SpinModelParams,
    TrotterVariant,
    build_dissipation_subcircuit,
)
from qsync.statevec import MeasureReset, QuantumCircuit, circuit_unitary, collapse, prob_one
from qsync.tomography import (
    CalibrationMatrix,
    mitigate_counts,
    ml_project,
    sample_counts,
    tomography_estimate,
    trace_distance,
)
from qsync.trajectory import run_ensemble

SEED = 20191007


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def test_dark_state_is_stationary(report):
    t0 = time.perf_counter()
    g = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(50):
        p = SpinModelParams(
            delta=g.uniform(-5, 5),
            gamma_10=g.uniform(0, 2),
            gamma_m10=g.uniform(0, 2),
            epsilon=0.0,
            j_01=complex(*g.normal(size=2)),
            j_0m1=complex(*g.normal(size=2)),
            dt=0.1,
        )
        worst = max(
            worst,
            np.linalg.norm(lindblad_rhs(spin_model(p), np.diag([0, 1, 0]).astype(complex))),
            np.linalg.norm(lindblad_rhs(encoded_model(p), initial_density("0"))),
        )
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 1.0
    report("AC-01", ok, f"dark state: max |rhs|_F = {worst:.2e} over 50 draws ({elapsed:.2f} s)")
    assert ok


def test_trajectory_ensemble_matches_master_equation(report):
    t0 = time.perf_counter()
    worst_ratio, where = 0.0, None
    for name in ("onset", "stabilization", "stabilization_from_excited"):
        spec = preset_spec(name, trajectories=100_000, engine="trajectory")
        assert spec.variant.jump_convention.value == "oracle_consistent"
        for initial in spec.initial_states:
            for n in spec.grid:
                stats = run_ensemble(_trajectory_config(spec, spec.params, n, initial))
                exact = oracle_density(spec.params, n, initial)
                diff = stats.mean_density - exact
                trot = 5 * n * spec.params.dt**3
                tol_re = np.maximum(3 * stats.se_real, trot)
                tol_im = np.maximum(3 * stats.se_imag, trot)
                ratio = max(
                    np.max(np.abs(diff.real) / np.maximum(tol_re, 1e-300)),
                    np.max(np.abs(diff.imag) / np.maximum(tol_im, 1e-300)),
                )
                if ratio > worst_ratio:
                    worst_ratio, where = ratio, (name, initial, n)
    elapsed = time.perf_counter() - t0
    ok = worst_ratio <= 1.0 and elapsed < 300
    report(
        "AC-02",
        ok,
        f"unraveling: worst |traj - oracle| / tol = {worst_ratio:.3f} at {where} ({elapsed:.1f} s)",
    )
    assert ok


def test_unitary_trotter_error_is_third_order(report):
    t0 = time.perf_counter()
    p = SpinModelParams(
        delta=0.7,
        epsilon=1.0,
        j_01=2 * np.exp(-1j * np.pi / 6),
        j_0m1=2 * np.exp(2j * np.pi / 6),
        j_m11=0.8 * np.exp(0.3j),
    )
    _, _, slope = trotter_error_scan(p, np.logspace(-3, -1, 9))
    elapsed = time.perf_counter() - t0
    ok = abs(slope - 3) <= 0.2 and elapsed < 10
    report("AC-03", ok, f"Trotter order: unitary error slope = {slope:.3f} ({elapsed:.2f} s)")
    assert ok


def _ancilla_clicks(circ, shots, seed):
    u = circuit_unitary(QuantumCircuit(2, [op for op in circ.ops if not isinstance(op, MeasureReset)]))
    amps = np.zeros((shots, 4), dtype=complex)
    amps[:, 1] = 1.0  # system qubit 0 in |1>, ancilla (qubit 1) in |0>
    amps = amps @ u.T
    p1 = prob_one(amps, 1, 2)
    clicks = crng.uniform(seed, np.arange(shots), 0, 0) < p1
    return clicks, collapse(amps, 1, 2, clicks)


def test_relaxation_circuits_jump_statistics(report):
    t0 = time.perf_counter()
    shots = 100_000
    circs = {
        style: build_dissipation_subcircuit(0.5, 0.2, style, system=0, ancilla=1)
        for style in (DissipationStyle.CCU, DissipationStyle.TWO_CNOT)
    }
    freqs = {}
    for k, (style, circ) in enumerate(circs.items()):
        clicks, _ = _ancilla_clicks(circ, shots, SEED + k)
        freqs[style] = clicks.mean()

    g = np.random.default_rng(SEED)
    states = [np.eye(4)[i] for i in range(4)]
    states += [v / np.linalg.norm(v) for v in g.normal(size=(20, 4)) + 1j * g.normal(size=(20, 4))]
    ua, ub = (
        circuit_unitary(QuantumCircuit(2, [op for op in c.ops if not isinstance(op, MeasureReset)]))
        for c in circs.values()
    )
    state_gap = 0.0
    for v in states:
        v = v.copy()
        v[2:] = 0  # ancilla starts in |0>
        if np.linalg.norm(v) == 0:
            continue
        v /= np.linalg.norm(v)
        a, b = ua @ v, ub @ v
        state_gap = max(state_gap, np.abs(a - b).max())
        for outcome in (False, True):
            if prob_one(a, 1, 2) == (0.0 if outcome else 1.0):
                continue
            pa = collapse(a[None], 1, 2, np.array([outcome]))
            pb = collapse(b[None], 1, 2, np.array([outcome]))
            state_gap = max(state_gap, np.abs(pa - pb).max())
    elapsed = time.perf_counter() - t0
    ok = all(abs(f - 0.2) <= 0.004 for f in freqs.values()) and state_gap < 1e-10 and elapsed < 30
    f4, f5 = freqs.values()
    report(
        "AC-04",
        ok,
        f"jump statistics: freq A4 = {f4:.4f}, A5 = {f5:.4f}; max state gap = {state_gap:.1e} ({elapsed:.2f} s)",
    )
    assert ok


def test_synchronization_scaling_with_signal_strength(report):
    t0 = time.perf_counter()
    spec = preset_spec("strength_scan")
    spec.grid = tuple(np.round(np.arange(0.05, 0.401, 0.05), 12))
    table = run_preset(spec)
    eps = table.column("epsilon")
    ref = observables_from_density(oracle_density(spec.params.with_(epsilon=0.0), spec.n_steps, "0"))
    slopes = {
        "|r10|": _slope(eps, table.column("oracle_abs_r10")),
        "|r-11|": _slope(eps, table.column("oracle_abs_rm11")),
    }
    for name in ("p_p1", "p_0", "p_m1"):
        slopes[f"d{name}"] = _slope(eps, np.abs(table.column(f"oracle_{name}") - ref[name]))
    elapsed = time.perf_counter() - t0
    ok = (
        abs(slopes["|r10|"] - 1) <= 0.1
        and all(abs(v - 2) <= 0.2 for k, v in slopes.items() if k != "|r10|")
        and elapsed < 10
    )
    detail = ", ".join(f"{k} {v:.3f}" for k, v in slopes.items())
    report("AC-05", ok, f"strength scaling slopes: {detail} ({elapsed:.2f} s)")
    assert ok


def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


def test_global_phase_rotates_coherences(report):
    table = run_preset(preset_spec("phase_scan_global"))
    chi = table.column("chi")
    worst = 0.0
    for name in ("arg_r10", "arg_r0m1"):
        arg = table.column(f"oracle_{name}")
        worst = max(worst, np.abs(_wrap(arg - arg[0] - chi)).max())
    ok = worst < 1e-6
    report("AC-06", ok, f"phase equivariance: max |d arg - chi| = {worst:.1e}")
    assert ok


def test_blockade_interior_minimum(report):
    t0 = time.perf_counter()
    table = run_preset(preset_spec("blockade_scan"))
    s_max = table.column("oracle_S_max")
    abs_sum = table.column("oracle_abs_sum")
    k = int(np.argmin(s_max))
    interior = 0 < k < len(s_max) - 1 and s_max[k] < s_max[k - 1] and s_max[k] < s_max[k + 1]
    contrast = abs_sum[0] / abs_sum[k]
    elapsed = time.perf_counter() - t0
    ok = interior and contrast >= 3 and elapsed < 30
    report(
        "AC-07",
        ok,
        f"blockade: min S_max at chi = {table.column('chi')[k]:.4f} (index {k}), "
        f"contrast {contrast:.1f}x ({elapsed:.2f} s)",
    )
    assert ok


def test_leakage_scaling(report):
    t0 = time.perf_counter()
    base = preset_spec("leakage_check").params
    eps = np.array([0.05, 0.1, 0.2, 0.4])
    n_steps = 4
    unc = TrotterVariant(signal_style="uncontrolled")
    coh, xx, ctrl_xx = [], [], 0.0
    for e in eps:
        p = base.with_(epsilon=float(e))
        rho = evolve_density(initial_density("0"), p, n_steps, unc)[-1]
        coh.append([abs(rho[i, SpinEncoding.x_index]) for i in SpinEncoding.spin_indices])
        xx.append(rho[3, 3].real)
        for r in evolve_density(initial_density("0"), p, n_steps):
            ctrl_xx = max(ctrl_xx, abs(r[3, 3]))
    coh = np.array(coh)
    k_slopes = [_slope(eps, coh[:, k]) for k in range(3)]
    max_slope = _slope(eps, coh.max(axis=1))
    xx_slope = _slope(eps, np.array(xx))
    elapsed = time.perf_counter() - t0
    ok = abs(max_slope - 3) <= 0.3 and abs(xx_slope - 4) <= 0.3 and ctrl_xx < 1e-12 and elapsed < 120
    report(
        "AC-08",
        ok,
        f"leakage: max|r_kX| exponent {max_slope:.3f} (k=+1,0,-1: "
        + ", ".join(f"{s:.2f}" for s in k_slopes)
        + f"), r_XX exponent {xx_slope:.3f}, controlled r_XX max {ctrl_xx:.1e} ({elapsed:.2f} s)",
    )
    assert ok


def _haar_qubit(g):
    v = g.normal(size=2) + 1j * g.normal(size=2)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def _dykstra_projection(a, tol=1e-15, max_iter=100_000):
    """Alternating projections onto the PSD cone and the unit-trace plane."""
    d = a.shape[0]
    x = a.copy()
    p = np.zeros_like(a)
    q = np.zeros_like(a)
    for _ in range(max_iter):
        y = x + p
        w, v = np.linalg.eigh(y)
        y_psd = (v * np.clip(w, 0, None)) @ v.conj().T
        p = y - y_psd
        z = y_psd + q
        z_tr = z - (np.trace(z) - 1) / d * np.eye(d)
        q = z - z_tr
        if np.max(np.abs(z_tr - x)) < tol:
            return z_tr
        x = z_tr
    return x


def test_tomography_fidelity_and_projection(report):
    g = np.random.default_rng(SEED)
    hits = 0
    for _ in range(200):
        rho = _haar_qubit(g)
        est = tomography_estimate(rho, 8192, g)
        hits += trace_distance(est.rho, rho) < 0.05
    worst = 0.0
    for _ in range(100):
        m = g.normal(size=(3, 3)) + 1j * g.normal(size=(3, 3))
        h = 0.5 * (m + m.conj().T)
        h += (1 - np.trace(h).real) / 3 * np.eye(3)
        worst = max(worst, np.linalg.norm(ml_project(h) - _dykstra_projection(h)))
    ok = hits >= 198 and worst < 1e-8
    report("AC-09", ok, f"tomography: {hits}/200 within 0.05; ml_project vs Dykstra {worst:.1e}")
    assert ok


def test_readout_mitigation_recovers_truth(report):
    g = np.random.default_rng(SEED)
    noise = NoiseParams(p_cnot=0.0, p_1q=0.0, p_read0=0.01, p_read1=0.01)
    m = readout_confusion(0.01, 0.01)
    cal = CalibrationMatrix(m)
    minv = np.linalg.inv(m)
    shots = 8192
    worst, misses = 0.0, 0
    for _ in range(100):
        rho = _haar_qubit(g)
        truth = np.real(np.diag(rho))
        p_hat = mitigate_counts(sample_counts(rho, "Z", shots, g, noise), cal)
        q = m @ truth
        cov = (np.diag(q) - np.outer(q, q)) / shots
        sigma = np.sqrt(np.diag(minv @ cov @ minv.T))
        z = np.max(np.abs(p_hat - truth) / sigma)
        worst = max(worst, z)
        misses += z > 3
    ok = misses == 0
    report("AC-10", ok, f"mitigation: worst deviation {worst:.2f} sigma, {misses}/100 states beyond 3 sigma")
    assert ok


def test_gate_noise_degrades_controlled_but_not_uncontrolled(report):
    params = preset_spec("signal_only").params
    rho0 = initial_density("0")
    noisy = evolve_density(rho0, params, 30, TrotterVariant(), NoiseParams(p_cnot=0.02, p_1q=0.0, p_read0=0.0, p_read1=0.0))
    purity = np.array([observables_from_density(r)["purity"] for r in noisy])
    monotone = bool(np.all(np.diff(purity) < 0))

    unc = TrotterVariant(signal_style="uncontrolled")
    ideal = evolve_density(rho0, params, 30, unc)
    light = evolve_density(rho0, params, 30, unc, NoiseParams(p_cnot=0.0, p_1q=0.002, p_read0=0.0, p_read1=0.0))
    dev = max(
        abs(observables_from_density(a)["p_0"] - observables_from_density(b)["p_0"]) for a, b in zip(ideal, light)
    )
    ok = monotone and dev <= 0.05
    report(
        "AC-11",
        ok,
        f"noise: controlled purity strictly decreasing = {monotone} ({purity[0]:.3f} -> {purity[-1]:.3f}); "
        f"uncontrolled max |dP0| = {dev:.4f}",
    )
    assert ok


@pytest.mark.parametrize("workers", [4])
def test_preset_output_is_deterministic(report, workers):
    spec = preset_spec("onset", engine="both", trajectories=20_000)
    first = results_to_csv(run_preset(spec, workers=1))
    again = results_to_csv(run_preset(spec, workers=1))
    parallel = results_to_csv(run_preset(spec, workers=workers))
    ok = first == again == parallel
    report("AC-12", ok, f"determinism: serial/serial/parallel({workers}) CSV identical = {ok}")
    assert ok
