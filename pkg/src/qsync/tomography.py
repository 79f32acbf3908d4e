"""Simulated-shot Pauli tomography, readout calibration and mitigation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .noise import NoiseParams, readout_confusion
from .spin1 import SpinEncoding
from .statevec import QuantumCircuit, u3

SIGMA = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass
class CountsTable:
    """Outcome counts for one measurement setting.

    ``basis`` names the Pauli measured on each qubit, highest qubit first, and
    outcome keys are bitstrings in the same order.
    """

    basis: str
    counts: dict
    shots: int = None

    def __post_init__(self):
        total = int(sum(self.counts.values()))
        if self.shots is None:
            self.shots = total
        if total != self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots} shots")
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("negative count")
        n = len(self.basis)
        if any(len(k) != n for k in self.counts):
            raise ValueError("outcome length does not match basis")

    def frequencies(self) -> np.ndarray:
        """Probability vector indexed by the integer value of the bitstring."""
        n = len(self.basis)
        vec = np.zeros(2**n)
        for k, v in self.counts.items():
            vec[int(k, 2)] += v
        return vec / self.shots


@dataclass
class CalibrationMatrix:
    m: np.ndarray
    shots: int | None = None

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        if np.any(self.m < -1e-15) or np.any(self.m > 1 + 1e-15):
            raise ValueError("calibration entries must lie in [0, 1]")
        if not np.allclose(self.m.sum(axis=0), 1.0, atol=1e-12):
            raise ValueError("calibration matrix must be column-stochastic")

    def tensor(self, other: "CalibrationMatrix") -> "CalibrationMatrix":
        """Calibration of (self qubit as high bit, other as low bit)."""
        shots = None if self.shots is None or other.shots is None else min(self.shots, other.shots)
        return CalibrationMatrix(np.kron(self.m, other.m), shots)


def tomography_circuits(target: int, n_qubits: int | None = None) -> dict:
    """Basis-change circuits so that a Z readout measures X, Y or Z."""
    n = n_qubits if n_qubits is not None else target + 1
    return {
        "X": QuantumCircuit(n, [u3(np.pi / 2, 0.0, np.pi, target)]),
        "Y": QuantumCircuit(n, [u3(np.pi / 2, 0.0, np.pi / 2, target)]),
        "Z": QuantumCircuit(n, []),
    }


def _rotate(rho: np.ndarray, basis: str) -> np.ndarray:
    """Apply the per-qubit basis changes to a multi-qubit density matrix."""
    from .statevec import circuit_unitary

    u = np.eye(1, dtype=complex)
    for b in basis:  # highest qubit first, matching kron order
        u = np.kron(u, circuit_unitary(tomography_circuits(0)[b]))
    return u @ rho @ u.conj().T


def outcome_probabilities(rho: np.ndarray, basis: str, noise: NoiseParams | None = None) -> np.ndarray:
    """Readout distribution for one setting, including readout flips if enabled."""
    probs = np.clip(np.real(np.diag(_rotate(np.asarray(rho, dtype=complex), basis))), 0, None)
    probs = probs / probs.sum()
    if noise is not None and noise.enabled:
        m = np.eye(1)
        for _ in basis:
            m = np.kron(m, readout_confusion(noise.p_read0, noise.p_read1))
        probs = m @ probs
    return probs


def _bitstrings(n: int):
    return ["".join(b) for b in itertools.product("01", repeat=n)]


def sample_counts(
    rho: np.ndarray,
    basis: str,
    shots: int,
    rng: np.random.Generator,
    noise: NoiseParams | None = None,
) -> CountsTable:
    probs = outcome_probabilities(rho, basis, noise)
    draws = rng.multinomial(shots, probs)
    return CountsTable(basis, dict(zip(_bitstrings(len(basis)), map(int, draws))), shots)


def simulate_tomography(rho_1q, shots: int, rng, noise=None) -> dict:
    return {b: sample_counts(rho_1q, b, shots, rng, noise) for b in "XYZ"}


def estimate_pauli_expectations(tables, cal: CalibrationMatrix | None = None) -> dict:
    """Single-qubit <P> and standard error for each measured basis.

    ``tables`` maps basis labels (or is an iterable of ``CountsTable``). With a
    calibration, frequencies are mitigated before forming the expectation.
    """
    if isinstance(tables, dict):
        tables = list(tables.values())
    if not tables:
        raise ValueError("no counts tables given")
    out = {}
    for t in tables:
        if len(t.basis) != 1:
            raise ValueError("single-qubit tables expected")
        if t.shots <= 0:
            raise ValueError(f"empty table for basis {t.basis}")
        p = mitigate_counts(t, cal) if cal is not None else t.frequencies()
        val = float(p[0] - p[1])
        out[t.basis] = (val, float(np.sqrt(max(1 - val**2, 0.0) / t.shots)))
    return out


def ml_project(rho: np.ndarray) -> np.ndarray:
    """Closest density matrix in Frobenius norm to a Hermitian unit-trace matrix.

    Eigenvalues are visited from the most negative upwards; each one that would be
    negative after sharing the running deficit is zeroed and its weight spread
    evenly over those remaining.
    """
    rho = np.asarray(rho, dtype=complex)
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)  # ascending
    d = len(w)
    w = w.copy()
    acc = 0.0
    i = 0
    while i < d and w[i] + acc / (d - i) < 0:
        acc += w[i]
        w[i] = 0.0
        i += 1
    if i < d:
        w[i:] += acc / (d - i)
    out = (v * w) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def bloch_to_rho(x: float, y: float, z: float) -> np.ndarray:
    return 0.5 * (np.eye(2) + x * SIGMA["X"] + y * SIGMA["Y"] + z * SIGMA["Z"])


def reconstruct_single_qubit(expectations) -> np.ndarray:
    """Linear inversion from <X>, <Y>, <Z>; projected if outside the Bloch ball."""
    if isinstance(expectations, dict):
        x, y, z = (float(np.atleast_1d(expectations[b])[0]) for b in "XYZ")
    else:
        x, y, z = expectations
    rho = bloch_to_rho(x, y, z)
    if np.sqrt(x * x + y * y + z * z) > 1:
        rho = ml_project(rho)
    return rho


def build_calibration(
    noise: NoiseParams,
    shots: int | None,
    rng: np.random.Generator | None = None,
) -> CalibrationMatrix:
    """Run prepare-|0> and prepare-|1> through the readout channel.

    ``shots=None`` returns the infinite-shot matrix.
    """
    p0, p1 = (noise.p_read0, noise.p_read1) if noise.enabled else (0.0, 0.0)
    exact = readout_confusion(p0, p1)
    if shots is None:
        return CalibrationMatrix(exact)
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    cols = [rng.multinomial(shots, exact[:, j]) / shots for j in range(2)]
    return CalibrationMatrix(np.column_stack(cols), shots)


def _solve_on_face(m, f, support):
    """Minimize |M p - f| with sum(p) = 1 and p zero off ``support``."""
    ms = m[:, support]
    k = len(support)
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = ms.T @ ms
    kkt[:k, k] = kkt[k, :k] = 1.0
    rhs = np.concatenate([ms.T @ f, [1.0]])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    p = np.zeros(m.shape[1])
    p[list(support)] = sol[:k]
    return p


def mitigate_counts(raw, cal: CalibrationMatrix, return_residual: bool = False):
    """Probability vector p >= 0, sum(p) = 1 minimizing |M p - raw frequencies|.

    Solved exactly by checking every support set, which is cheap for the 2- and
    4-outcome tables used here.
    """
    f = raw.frequencies() if isinstance(raw, CountsTable) else np.asarray(raw, dtype=float)
    m = cal.m
    if m.shape[0] != len(f):
        raise ValueError("calibration size does not match the counts")
    d = m.shape[1]
    best, best_obj = None, np.inf
    for size in range(1, d + 1):
        for support in itertools.combinations(range(d), size):
            p = _solve_on_face(m, f, support)
            if np.any(p < -1e-12):
                continue
            p = np.clip(p, 0, None)
            p /= p.sum()
            obj = float(np.sum((m @ p - f) ** 2))
            if obj < best_obj - 1e-15:
                best, best_obj = p, obj
    if return_residual:
        return best, float(np.sqrt(best_obj))
    return best


def assemble_spin1_density(rho_q1: np.ndarray, rho_q0: np.ndarray) -> np.ndarray:
    """Spin-1 state from separately measured qubits, via the product ansatz.

    The +1/-1 coherence follows from the product structure; it is not measured
    independently by this protocol.
    """
    rho4 = np.kron(np.asarray(rho_q1), np.asarray(rho_q0))
    rho_xx = float(rho4[SpinEncoding.x_index, SpinEncoding.x_index].real)
    if rho_xx >= 1 - 1e-9:
        raise ValueError("product state sits in |X>; spin block cannot be renormalized")
    return SpinEncoding.spin_block(rho4) / (1 - rho_xx)


@dataclass
class SpinTomography:
    """Spin-1 state assembled from two single-qubit tomographies.

    Entries listed in ``derived_not_measured`` follow from the product ansatz.
    """

    rho: np.ndarray
    q1: "QubitTomography"
    q0: "QubitTomography"
    derived_not_measured: tuple = ("rho_+1,-1",)


def spin1_from_tomography(tomo_q1: "QubitTomography", tomo_q0: "QubitTomography") -> SpinTomography:
    return SpinTomography(assemble_spin1_density(tomo_q1.rho, tomo_q0.rho), tomo_q1, tomo_q0)


def reduced_qubit_state(rho4: np.ndarray, qubit: int) -> np.ndarray:
    """Single-qubit marginal of a two-qubit state (qubit 0 = LSB)."""
    r = np.asarray(rho4).reshape(2, 2, 2, 2)  # (q1, q0, q1', q0')
    if qubit == 1:
        return np.einsum("ajbj->ab", r)
    return np.einsum("jajb->ab", r)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


# text serialization: one "basis,outcome,count" line per entry


def write_counts(tables, path) -> None:
    with open(path, "w") as fh:
        fh.write("basis,outcome,count\n")
        for t in tables:
            for outcome in sorted(t.counts):
                fh.write(f"{t.basis},{outcome},{t.counts[outcome]}\n")


def read_counts(path) -> list:
    grouped: dict = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "basis,outcome,count":
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            basis, outcome, count = line.split(",")
            grouped.setdefault(basis, {})[outcome] = int(count)
    return [CountsTable(b, c) for b, c in grouped.items()]


@dataclass
class QubitTomography:
    """Result of single-qubit tomography with optional mitigation."""

    rho: np.ndarray
    expectations: dict
    tables: dict = field(default_factory=dict)


def tomography_estimate(rho_1q, shots: int, rng, noise=None, cal=None) -> QubitTomography:
    tables = simulate_tomography(rho_1q, shots, rng, noise)
    exps = estimate_pauli_expectations(tables, cal)
    return QubitTomography(reconstruct_single_qubit({b: v[0] for b, v in exps.items()}), exps, tables)
