"""Exact ensemble average of the Trotter circuits, computed on density matrices.

Measure-and-reset becomes the reset channel and sampled noise becomes its
channel average, so these results are what infinitely many trajectories give.
"""

from __future__ import annotations

import numpy as np

from .noise import NoiseParams, amplitude_damping_channel, depolarizing_channel
from .spin1 import Q0, Q1, SpinModelParams, TrotterVariant, build_trotter_step
from .statevec import MeasureReset, QuantumCircuit, bit_mask, gate_matrix


def embed_system(rho_sys: np.ndarray, n_qubits: int) -> np.ndarray:
    """Two-qubit system state with every higher (ancilla) qubit in |0>."""
    rho_sys = np.asarray(rho_sys, dtype=complex)
    if n_qubits == 2:
        return rho_sys.copy()
    anc = np.zeros((2 ** (n_qubits - 2),) * 2, dtype=complex)
    anc[0, 0] = 1.0
    return np.kron(anc, rho_sys)


def trace_out_ancillas(rho: np.ndarray, n_qubits: int) -> np.ndarray:
    if n_qubits == 2:
        return rho
    m = 2 ** (n_qubits - 2)
    return np.einsum("aiaj->ij", rho.reshape(m, 4, m, 4))


def reset_channel(rho: np.ndarray, target: int, n: int) -> np.ndarray:
    mask = bit_mask(target, n)
    perm = np.arange(2**n) ^ (1 << target)
    p0 = np.where(mask[:, None] | mask[None, :], 0.0, rho)
    p1 = np.where(mask[:, None] & mask[None, :], rho, 0.0)
    return p0 + p1[np.ix_(perm, perm)]


def apply_circuit_density(rho: np.ndarray, circuit: QuantumCircuit, noise: NoiseParams | None = None) -> np.ndarray:
    n = circuit.n_qubits
    for op in circuit.ops:
        if isinstance(op, MeasureReset):
            rho = reset_channel(rho, op.target, n)
            continue
        u = gate_matrix(op, n)
        rho = u @ rho @ u.conj().T
        err = noise.gate_error(op) if noise is not None else None
        if err is not None:
            qubits, p, reps = err
            for _ in range(reps):
                rho = depolarizing_channel(rho, qubits, p, n)
    return rho


def step_channel_density(
    rho_sys: np.ndarray,
    params: SpinModelParams,
    variant: TrotterVariant = TrotterVariant(),
    noise: NoiseParams | None = None,
) -> np.ndarray:
    circ = build_trotter_step(params, variant)
    rho = apply_circuit_density(embed_system(rho_sys, circ.n_qubits), circ, noise)
    if noise is not None and noise.enabled and noise.p_damp > 0:
        for q in (Q1, Q0):
            rho = amplitude_damping_channel(rho, q, noise.p_damp, circ.n_qubits)
    return trace_out_ancillas(rho, circ.n_qubits)


def evolve_density(
    rho0: np.ndarray,
    params: SpinModelParams,
    n_steps: int,
    variant: TrotterVariant = TrotterVariant(),
    noise: NoiseParams | None = None,
) -> list[np.ndarray]:
    """Two-qubit density matrices after 0, 1, ..., n_steps Trotter steps."""
    out = [np.asarray(rho0, dtype=complex)]
    for _ in range(n_steps):
        out.append(step_channel_density(out[-1], params, variant, noise))
    return out
