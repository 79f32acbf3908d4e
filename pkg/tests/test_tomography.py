import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsync.noise import NoiseParams, readout_confusion
from qsync.tomography import (
    CalibrationMatrix,
    CountsTable,
    assemble_spin1_density,
    bloch_to_rho,
    build_calibration,
    estimate_pauli_expectations,
    mitigate_counts,
    ml_project,
    outcome_probabilities,
    read_counts,
    reconstruct_single_qubit,
    reduced_qubit_state,
    sample_counts,
    simulate_tomography,
    spin1_from_tomography,
    tomography_estimate,
    tomography_circuits,
    trace_distance,
    write_counts,
)

NO_FLIP_NOISE = NoiseParams(0, 0, 0.01, 0.01)


def test_basis_circuits():
    assert len(tomography_circuits(0)["Z"]) == 0
    plus = np.full((2, 2), 0.5)
    assert outcome_probabilities(plus, "X")[0] == pytest.approx(1)
    plus_i = 0.5 * np.array([[1, -1j], [1j, 1]])
    assert outcome_probabilities(plus_i, "Y")[0] == pytest.approx(1)


def test_expectation_examples():
    z = estimate_pauli_expectations([CountsTable("Z", {"0": 8192, "1": 0})])["Z"]
    assert z == (1.0, 0.0)
    val, se = estimate_pauli_expectations([CountsTable("Z", {"0": 4096, "1": 4096})])["Z"]
    assert val == 0 and se == pytest.approx(0.01105, abs=1e-5)
    x = estimate_pauli_expectations([CountsTable("X", {"0": 6144, "1": 2048})])["X"][0]
    assert x == pytest.approx(0.5)
    with pytest.raises(ValueError):
        estimate_pauli_expectations([])


def test_counts_table_validation():
    with pytest.raises(ValueError):
        CountsTable("Z", {"0": 5}, shots=6)
    with pytest.raises(ValueError):
        CountsTable("Z", {"00": 5})


def test_linear_inversion_examples():
    assert np.allclose(reconstruct_single_qubit((0, 0, 1)), np.diag([1, 0]))
    assert np.allclose(reconstruct_single_qubit((0, 0, 0)), np.eye(2) / 2)
    rho = reconstruct_single_qubit((0.8, 0, 0.8))
    assert np.allclose(rho, bloch_to_rho(1 / np.sqrt(2), 0, 1 / np.sqrt(2)))


def test_ml_project_examples():
    assert np.allclose(ml_project(np.diag([0.6, 0.5, -0.1])), np.diag([0.55, 0.45, 0]))
    assert np.allclose(ml_project(np.diag([1.5, -0.25, -0.25])), np.diag([1, 0, 0]))
    rho = np.array([[0.5, 0.1j, 0], [-0.1j, 0.3, 0], [0, 0, 0.2]])
    assert np.allclose(ml_project(rho), rho, atol=1e-13)


def _simplex_projection_sorted(w):
    """Euclidean projection onto the probability simplex, by sorting."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.nonzero(u - (css - 1) / np.arange(1, len(w) + 1) > 0)[0][-1]
    tau = (css[k] - 1) / (k + 1)
    return np.clip(w - tau, 0, None)


@settings(max_examples=100)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=5), st.integers(0, 2**31))
def test_ml_project_matches_simplex_oracle(vals, seed):
    w = np.array(vals) + (1 - sum(vals)) / len(vals)
    g = np.random.default_rng(seed)
    q, _ = np.linalg.qr(g.normal(size=(len(w), len(w))) + 1j * g.normal(size=(len(w), len(w))))
    h = (q * w) @ q.conj().T
    expected = (q * _simplex_projection_sorted(w)) @ q.conj().T
    out = ml_project(h)
    assert np.allclose(out, expected, atol=1e-10)
    assert np.trace(out).real == pytest.approx(1)
    assert np.linalg.eigvalsh(out).min() > -1e-12


def test_calibration_examples():
    assert np.allclose(build_calibration(NoiseParams.off(), None).m, np.eye(2))
    assert np.allclose(build_calibration(NO_FLIP_NOISE, None).m, [[0.99, 0.01], [0.01, 0.99]])
    m = readout_confusion(0.02, 0.01)
    assert np.allclose(m[:, 0], [0.98, 0.02]) and np.allclose(m[:, 1], [0.01, 0.99])
    sampled = build_calibration(NO_FLIP_NOISE, 100_000, np.random.default_rng(1))
    assert np.all(np.abs(sampled.m - readout_confusion(0.01, 0.01)) < 3 * np.sqrt(0.01 * 0.99 / 100_000))
    with pytest.raises(ValueError):
        CalibrationMatrix([[0.5, 0.5], [0.2, 0.5]])


def test_mitigation_examples():
    raw = np.array([0.3, 0.7])
    assert np.allclose(mitigate_counts(raw, CalibrationMatrix(np.eye(2))), raw)
    cal = CalibrationMatrix(readout_confusion(0.01, 0.01))
    assert np.allclose(mitigate_counts(np.array([0.99, 0.01]), cal), [1, 0])
    p, resid = mitigate_counts(np.array([1.0, 0.0]), cal, return_residual=True)
    assert np.allclose(p, [1, 0]) and resid > 0


@given(st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda v: sum(v) > 0.1))
def test_mitigation_output_is_a_distribution(v):
    f = np.array(v) / sum(v)
    cal = CalibrationMatrix(readout_confusion(0.05, 0.1)).tensor(CalibrationMatrix(readout_confusion(0.02, 0.03)))
    p = mitigate_counts(f, cal)
    assert np.all(p >= 0) and p.sum() == pytest.approx(1)


def test_mitigation_error_rate_matches_three_sigma():
    """Mitigated Z-basis probabilities exceed 3 sigma at the Gaussian rate."""
    g = np.random.default_rng(77)
    m = readout_confusion(0.01, 0.01)
    minv = np.linalg.inv(m)
    cal = CalibrationMatrix(m)
    n, shots, over = 4000, 8192, 0
    for _ in range(n):
        v = g.normal(size=2) + 1j * g.normal(size=2)
        v /= np.linalg.norm(v)
        truth = np.abs(v) ** 2
        p_hat = mitigate_counts(sample_counts(np.outer(v, v.conj()), "Z", shots, g, NO_FLIP_NOISE), cal)
        q = m @ truth
        sigma = np.sqrt(np.diag(minv @ ((np.diag(q) - np.outer(q, q)) / shots) @ minv.T))
        over += np.max(np.abs(p_hat - truth) / sigma) > 3
    assert over / n < 0.01


def test_mitigated_tomography_beats_raw():
    g = np.random.default_rng(5)
    rho = bloch_to_rho(0, 0, 1)
    cal = build_calibration(NoiseParams(0, 0, 0.05, 0.05), None)
    tables = simulate_tomography(rho, 8192, g, NoiseParams(0, 0, 0.05, 0.05))
    raw = estimate_pauli_expectations(tables)["Z"][0]
    fixed = estimate_pauli_expectations(tables, cal)["Z"][0]
    assert abs(fixed - 1) < abs(raw - 1)


def test_assembly_examples():
    zero = np.diag([1, 0]).astype(complex)
    assert np.allclose(assemble_spin1_density(zero, zero), np.diag([0, 1, 0]))
    assert np.allclose(assemble_spin1_density(np.eye(2) / 2, zero), np.diag([0.5, 0.5, 0]))
    with pytest.raises(ValueError):
        assemble_spin1_density(np.diag([0, 1]), np.diag([0, 1]))


def test_assembly_against_two_qubit_construction():
    g = np.random.default_rng(8)
    a = bloch_to_rho(*(0.7 * g.normal(size=3) / np.sqrt(3)))
    b = bloch_to_rho(0.1, 0.3, 0.8)
    rho4 = np.kron(a, b)
    assert np.allclose(reduced_qubit_state(rho4, 1), a) and np.allclose(reduced_qubit_state(rho4, 0), b)
    est = [reconstruct_single_qubit({k: v[0] for k, v in estimate_pauli_expectations(simulate_tomography(r, 8192, g)).items()}) for r in (a, b)]
    spin = assemble_spin1_density(*est)
    direct = assemble_spin1_density(a, b)
    assert np.max(np.abs(spin - direct)) < 0.05


def test_two_qubit_counts_and_roundtrip(tmp_path):
    g = np.random.default_rng(2)
    rho = np.kron(bloch_to_rho(0, 0, 1), bloch_to_rho(1, 0, 0))
    tables = [sample_counts(rho, b, 1000, g) for b in ("ZX", "ZZ")]
    assert tables[0].counts["00"] == 1000
    path = tmp_path / "counts.csv"
    write_counts(tables, path)
    back = read_counts(path)
    assert [t.counts for t in back] == [t.counts for t in tables]


def test_trace_distance():
    assert trace_distance(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(1)


def test_spin_assembly_from_tomographies_flags_derived_entry():
    g = np.random.default_rng(4)
    a, b = bloch_to_rho(0.3, 0.1, 0.5), bloch_to_rho(0.2, -0.4, 0.6)
    res = spin1_from_tomography(tomography_estimate(a, 8192, g), tomography_estimate(b, 8192, g))
    assert res.derived_not_measured == ("rho_+1,-1",)
    assert np.max(np.abs(res.rho - assemble_spin1_density(a, b))) < 0.05
