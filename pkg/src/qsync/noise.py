"""Parametric NISQ noise: Pauli-twirl depolarizing errors and readout flips."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields

import numpy as np

from .statevec import GateKind, GateOp, StateVector, pauli_matrix

# two-qubit gates are costed in CNOTs; a controlled U3 compiles to two
CNOT_COST = {GateKind.CNOT: 1, GateKind.CU3: 2}


@dataclass(frozen=True)
class NoiseParams:
    p_cnot: float = 0.02
    p_1q: float = 0.002
    p_read0: float = 0.01
    p_read1: float = 0.01
    enabled: bool = True
    p_damp: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if f.name == "enabled":
                continue
            v = getattr(self, f.name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{f.name}={v} is not a probability")

    @classmethod
    def off(cls) -> "NoiseParams":
        return cls(0.0, 0.0, 0.0, 0.0, enabled=False)

    @property
    def active(self) -> bool:
        return self.enabled and any(
            (self.p_cnot, self.p_1q, self.p_read0, self.p_read1, self.p_damp)
        )

    def gate_error(self, op: GateOp):
        """(qubits, probability, repetitions) of the error following ``op``, or None."""
        if not self.enabled:
            return None
        if op.kind is GateKind.U3:
            if op.is_virtual or self.p_1q == 0:
                return None
            return (op.target,), self.p_1q, 1
        if self.p_cnot == 0:
            return None
        return (op.control, op.target), self.p_cnot, CNOT_COST[op.kind]

    @classmethod
    def from_mapping(cls, data) -> "NoiseParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown noise fields: {sorted(unknown)}")
        return cls(**data)


def nonidentity_paulis(n_qubits: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)][1:]


def pauli_choice(u, p: float, n_qubits: int):
    """Map uniform draws to a Pauli index (0 = no error, 1..4^n-1 otherwise).

    A single draw decides both: ``u < p`` triggers an error and ``u / p`` is then
    uniform again and selects the Pauli.
    """
    u = np.asarray(u, dtype=float)
    k = 4**n_qubits - 1
    if p <= 0:
        return np.zeros(u.shape, dtype=int)
    frac = np.minimum(u / p, 1.0) if p >= 1e-300 else np.where(u < p, 0.0, 1.0)
    which = np.minimum((frac * k).astype(int), k - 1) + 1
    return np.where(u < p, which, 0)


def apply_depolarizing_batch(amps: np.ndarray, qubits, p: float, draws, n: int) -> np.ndarray:
    """Sampled depolarizing error on a batch of amplitude vectors (last axis)."""
    choice = pauli_choice(draws, p, len(qubits))
    if not np.any(choice):
        return amps
    out = amps.copy()
    for idx, label in enumerate(nonidentity_paulis(len(qubits)), start=1):
        hit = choice == idx
        if np.any(hit):
            out[hit] = amps[hit] @ pauli_matrix(label, qubits, n).T
    return out


def apply_depolarizing_sample(state: StateVector, qubits, p: float, draw: float) -> StateVector:
    """With probability ``p`` apply a uniformly random non-identity Pauli."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    qubits = tuple(qubits)
    amps = apply_depolarizing_batch(state.amplitudes[None, :], qubits, p, np.array([draw]), state.n_qubits)
    return StateVector(state.n_qubits, amps[0])


def apply_readout_flip(outcome, p_read0: float, p_read1: float, draw):
    """Flip 0 -> 1 with ``p_read0`` and 1 -> 0 with ``p_read1``; vectorized."""
    outcome = np.asarray(outcome, dtype=int)
    draw = np.asarray(draw, dtype=float)
    flip = np.where(outcome == 0, draw < p_read0, draw < p_read1)
    out = np.where(flip, 1 - outcome, outcome)
    return int(out) if out.ndim == 0 else out


def amplitude_damping_batch(amps: np.ndarray, target: int, gamma: float, draws, n: int) -> np.ndarray:
    """Sampled amplitude-damping jump of ``target`` towards |0>."""
    if gamma <= 0:
        return amps
    mask = ((np.arange(2**n) >> target) & 1).astype(bool)
    p1 = np.sum(np.abs(amps[..., mask]) ** 2, axis=-1)
    jump = np.asarray(draws) < gamma * p1
    perm = np.arange(2**n) ^ (1 << target)
    jumped = np.where(mask, 0.0, amps[..., perm])
    kept = np.where(mask, amps * np.sqrt(1 - gamma), amps)
    out = np.where(jump[..., None], jumped, kept)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


# density-matrix forms, used as the exact ensemble average


def depolarizing_channel(rho: np.ndarray, qubits, p: float, n: int) -> np.ndarray:
    if p == 0:
        return rho
    labels = nonidentity_paulis(len(qubits))
    twirl = sum(
        (m := pauli_matrix(lab, qubits, n)) @ rho @ m.conj().T for lab in labels
    ) / len(labels)
    return (1 - p) * rho + p * twirl


def amplitude_damping_channel(rho: np.ndarray, target: int, gamma: float, n: int) -> np.ndarray:
    if gamma == 0:
        return rho
    dim = 2**n
    idx = np.arange(dim)
    mask = ((idx >> target) & 1).astype(bool)
    k0 = np.diag(np.where(mask, np.sqrt(1 - gamma), 1.0)).astype(complex)
    k1 = np.zeros((dim, dim), dtype=complex)
    k1[idx[mask] ^ (1 << target), idx[mask]] = np.sqrt(gamma)
    return k0 @ rho @ k0.conj().T + k1 @ rho @ k1.conj().T


def readout_confusion(p_read0: float, p_read1: float) -> np.ndarray:
    """Column-stochastic single-qubit assignment matrix, m[i, j] = P(read i | true j)."""
    return np.array([[1 - p_read0, p_read1], [p_read0, 1 - p_read1]])
