"""Few-qubit pure-state circuit engine.

Amplitude arrays use qubit 0 as the least-significant bit of the basis index.
All kernels accept a leading batch axis so the trajectory engine can push many
shots through the same gate at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional, Union

import numpy as np


class GateKind(str, Enum):
    U3 = "U3"
    CNOT = "CNOT"
    CU3 = "ControlledU3"


class Polarity(str, Enum):
    ON_ZERO = "on_zero"
    ON_ONE = "on_one"


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    target: int
    params: tuple = (0.0, 0.0, 0.0)
    control: Optional[int] = None
    polarity: Polarity = Polarity.ON_ONE

    def __post_init__(self):
        if self.kind is GateKind.U3 and self.control is not None:
            raise ValueError("U3 gate cannot carry a control")
        if self.kind is not GateKind.U3 and self.control is None:
            raise ValueError(f"{self.kind.value} needs a control qubit")
        if self.control is not None and self.control == self.target:
            raise ValueError("control and target must differ")

    @property
    def qubits(self) -> tuple:
        return (self.target,) if self.control is None else (self.control, self.target)

    @property
    def is_virtual(self) -> bool:
        """Phase gates U1 are frame changes on IBM hardware and carry no error."""
        theta, phi, _ = self.params
        return self.kind is GateKind.U3 and theta == 0.0 and phi == 0.0


@dataclass(frozen=True)
class MeasureReset:
    target: int
    label: str

    @property
    def qubits(self) -> tuple:
        return (self.target,)


Op = Union[GateOp, MeasureReset]


def u3(theta, phi, lam, target) -> GateOp:
    return GateOp(GateKind.U3, target, (float(theta), float(phi), float(lam)))


def u1(lam, target) -> GateOp:
    return u3(0.0, 0.0, lam, target)


def cnot(control, target) -> GateOp:
    return GateOp(GateKind.CNOT, target, (np.pi, 0.0, np.pi), control, Polarity.ON_ONE)


def cu3(theta, phi, lam, control, target, polarity=Polarity.ON_ONE) -> GateOp:
    return GateOp(
        GateKind.CU3, target, (float(theta), float(phi), float(lam)), control, Polarity(polarity)
    )


@dataclass
class QuantumCircuit:
    n_qubits: int
    ops: list = field(default_factory=list)

    def __post_init__(self):
        for op in self.ops:
            self._check(op)

    def _check(self, op):
        for q in op.qubits:
            if not 0 <= q < self.n_qubits:
                raise IndexError(f"qubit {q} outside register of {self.n_qubits}")

    def append(self, op: Op) -> "QuantumCircuit":
        self._check(op)
        self.ops.append(op)
        return self

    def extend(self, ops) -> "QuantumCircuit":
        for op in ops:
            self.append(op)
        return self

    def __add__(self, other: "QuantumCircuit") -> "QuantumCircuit":
        n = max(self.n_qubits, other.n_qubits)
        return QuantumCircuit(n, list(self.ops) + list(other.ops))

    def __len__(self):
        return len(self.ops)

    def gates(self):
        return [op for op in self.ops if isinstance(op, GateOp)]

    def count(self, kind: GateKind) -> int:
        return sum(1 for op in self.gates() if op.kind is kind)

    def __str__(self):
        return format_circuit(self)


def format_circuit(circuit: QuantumCircuit) -> str:
    """Plain-text gate list, one operation per line."""
    lines = [f"# {circuit.n_qubits} qubits, {len(circuit)} ops"]
    for op in circuit.ops:
        if isinstance(op, MeasureReset):
            lines.append(f"MEASURE_RESET q{op.target} -> {op.label}")
            continue
        angles = " ".join(f"{a:+.6f}" for a in op.params)
        if op.kind is GateKind.U3:
            lines.append(f"U3 q{op.target} {angles}")
        elif op.kind is GateKind.CNOT:
            lines.append(f"CNOT q{op.control} q{op.target}")
        else:
            lines.append(f"CU3[{op.polarity.value}] q{op.control} q{op.target} {angles}")
    return "\n".join(lines)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """IBM U3 gate with its literal phase convention (no global phase removed)."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (lam + phi)) * c],
        ],
        dtype=complex,
    )


def _embed_single(u: np.ndarray, target: int, n: int) -> np.ndarray:
    ops = [np.eye(2, dtype=complex)] * n
    ops = list(ops)
    ops[target] = u
    out = np.array([[1.0 + 0j]])
    # kron with highest qubit first so qubit 0 ends up as the LSB
    for k in reversed(range(n)):
        out = np.kron(out, ops[k])
    return out


@lru_cache(maxsize=4096)
def _gate_matrix_cached(op: GateOp, n: int) -> np.ndarray:
    u = u3_matrix(*op.params)
    if op.control is None:
        return _embed_single(u, op.target, n)
    dim = 2**n
    idx = np.arange(dim)
    fires = ((idx >> op.control) & 1) == (1 if op.polarity is Polarity.ON_ONE else 0)
    full_u = _embed_single(u, op.target, n)
    m = np.eye(dim, dtype=complex)
    m[fires, :] = full_u[fires, :]
    return m


def gate_matrix(op: GateOp, n_qubits: int) -> np.ndarray:
    """Full 2^n x 2^n unitary of a gate."""
    m = _gate_matrix_cached(op, n_qubits)
    m.flags.writeable = False
    return m


def circuit_unitary(circuit: QuantumCircuit) -> np.ndarray:
    """Product of all gate unitaries; measure-reset markers are rejected."""
    dim = 2**circuit.n_qubits
    u = np.eye(dim, dtype=complex)
    for op in circuit.ops:
        if isinstance(op, MeasureReset):
            raise ValueError("circuit contains a measurement; no unitary exists")
        u = gate_matrix(op, circuit.n_qubits) @ u
    return u


def apply_matrix(amps: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Apply a full-register matrix to one state or a batch (last axis)."""
    return amps @ m.T


def bit_mask(target: int, n: int) -> np.ndarray:
    return ((np.arange(2**n) >> target) & 1).astype(bool)


def prob_one(amps: np.ndarray, target: int, n: int) -> np.ndarray:
    return np.sum(np.abs(amps[..., bit_mask(target, n)]) ** 2, axis=-1)


def collapse(amps: np.ndarray, target: int, n: int, outcome) -> np.ndarray:
    """Project onto the given outcome(s) along the last axis and renormalize."""
    mask = bit_mask(target, n)
    outcome = np.asarray(outcome, dtype=bool)
    keep = np.where(outcome[..., None], mask, ~mask)
    out = np.where(keep, amps, 0.0)
    norm = np.sqrt(np.sum(np.abs(out) ** 2, axis=-1, keepdims=True))
    assert np.all(norm > 0), "selected a zero-probability branch"
    return out / norm


def flip_bit(amps: np.ndarray, target: int, n: int, where=True) -> np.ndarray:
    perm = np.arange(2**n) ^ (1 << target)
    flipped = amps[..., perm]
    where = np.asarray(where, dtype=bool)
    if where.ndim == 0:
        return flipped if where else amps
    return np.where(where[..., None], flipped, amps)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2 ** self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def tensor(self, other: "StateVector") -> "StateVector":
        """Append ``other`` as the higher-index qubits."""
        return StateVector(
            self.n_qubits + other.n_qubits, np.kron(other.amplitudes, self.amplitudes)
        )


def apply_gate(state: StateVector, op: GateOp) -> StateVector:
    for q in op.qubits:
        if not 0 <= q < state.n_qubits:
            raise IndexError(f"qubit {q} outside register of {state.n_qubits}")
    m = gate_matrix(op, state.n_qubits)
    return StateVector(state.n_qubits, apply_matrix(state.amplitudes, m))


def apply_circuit(state: StateVector, circuit: QuantumCircuit, draws=None):
    """Run a circuit on one state.

    ``draws`` supplies one uniform number per measure-reset, in order. Returns the
    final state and the list of measurement outcomes.
    """
    draws = iter(draws if draws is not None else ())
    outcomes = []
    for op in circuit.ops:
        if isinstance(op, MeasureReset):
            bit, state = measure_qubit(state, op.target, next(draws))
            if bit:
                state = StateVector(state.n_qubits, flip_bit(state.amplitudes, op.target, state.n_qubits))
            outcomes.append(bit)
        else:
            state = apply_gate(state, op)
    return state, outcomes


def measure_qubit(state: StateVector, target: int, random_draw: float):
    """Projective Z measurement; outcome is 1 iff ``random_draw < P(1)``."""
    if not 0 <= target < state.n_qubits:
        raise IndexError(f"qubit {target} outside register of {state.n_qubits}")
    p1 = float(prob_one(state.amplitudes, target, state.n_qubits))
    outcome = int(random_draw < p1)
    collapsed = collapse(state.amplitudes, target, state.n_qubits, bool(outcome))
    return outcome, StateVector(state.n_qubits, collapsed)


PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(label: str, qubits, n: int) -> np.ndarray:
    """Full-register matrix of a Pauli string; ``label[k]`` acts on ``qubits[k]``."""
    m = np.eye(2**n, dtype=complex)
    for p, q in zip(label, qubits):
        m = _embed_single(PAULIS[p], q, n) @ m
    return m
