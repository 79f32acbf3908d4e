"""Spin-1 limit-cycle oscillator encoded in two qubits, and its Trotter circuits.

Encoding (qubit 0 = LSB of the basis index)::

    |+1> = |1>_q1 |0>_q0   index 2
    |0>  = |0>_q1 |0>_q0   index 0
    |-1> = |0>_q1 |1>_q0   index 1
    |X>  = |1>_q1 |1>_q0   index 3   (surplus state)

Spin matrices use the basis order (+1, 0, -1).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .statevec import (
    MeasureReset,
    Polarity,
    QuantumCircuit,
    StateVector,
    cnot,
    cu3,
    u1,
    u3,
)

Q0, Q1, ANCILLA = 0, 1, 2

SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
SPLUS = np.sqrt(2) * np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]], dtype=complex)
SMINUS = SPLUS.conj().T

GAMMA_DT_WARN = 0.25


@dataclass(frozen=True)
class SpinModelParams:
    """Rates are angular frequencies; the ``j`` coefficients are dimensionless."""

    delta: float = 0.0
    epsilon: float = 0.0
    gamma_m10: float = 0.0
    gamma_10: float = 0.0
    j_01: complex = 0j
    j_0m1: complex = 0j
    j_m11: complex = 0j
    dt: float = 0.1

    def __post_init__(self):
        for name in ("epsilon", "gamma_m10", "gamma_10", "dt"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("gamma_m10", "gamma_10"):
            g = getattr(self, name) * self.dt
            if g >= 1:
                raise ValueError(f"{name}*dt = {g} >= 1, relaxation angle undefined")
            if g > GAMMA_DT_WARN:
                warnings.warn(f"{name}*dt = {g:.3g} is not small; Trotter error grows", stacklevel=3)

    def with_(self, **changes) -> "SpinModelParams":
        return replace(self, **changes)


class SpinEncoding:
    """Constant map between spin-1 labels and two-qubit basis indices."""

    q0 = Q0
    q1 = Q1
    index = {"+1": 2, "0": 0, "-1": 1, "X": 3}
    # spin-basis order (+1, 0, -1) as two-qubit indices
    spin_indices = (2, 0, 1)
    x_index = 3

    @classmethod
    def embed(cls, spin_op: np.ndarray, x_value: complex = 0.0) -> np.ndarray:
        """Lift a 3x3 spin operator to 4x4, with ``x_value`` on the |X> diagonal."""
        out = np.zeros((4, 4), dtype=complex)
        idx = np.array(cls.spin_indices)
        out[np.ix_(idx, idx)] = spin_op
        out[cls.x_index, cls.x_index] = x_value
        return out

    @classmethod
    def spin_block(cls, rho4: np.ndarray) -> np.ndarray:
        idx = np.array(cls.spin_indices)
        return rho4[np.ix_(idx, idx)]


def _spin_label(spin_state) -> str:
    labels = {1: "+1", 0: "0", -1: "-1", "+1": "+1", "1": "+1", "0": "0", "-1": "-1", "X": "X", "x": "X"}
    try:
        return labels[spin_state]
    except (KeyError, TypeError):
        raise ValueError(f"unknown spin state {spin_state!r}") from None


def encode_basis_state(spin_state) -> StateVector:
    return StateVector.basis(2, SpinEncoding.index[_spin_label(spin_state)])


class SignalStyle(str, Enum):
    CONTROLLED = "controlled"
    UNCONTROLLED = "uncontrolled"


class DissipationStyle(str, Enum):
    CCU = "ccu_circuit_A4"
    TWO_CNOT = "two_cnot_circuit_A5"


class JumpConvention(str, Enum):
    ORACLE_CONSISTENT = "oracle_consistent"
    PAPER_LITERAL = "paper_literal"


@dataclass(frozen=True)
class TrotterVariant:
    signal_style: SignalStyle = SignalStyle.CONTROLLED
    dissipation_style: DissipationStyle = DissipationStyle.CCU
    jump_convention: JumpConvention = JumpConvention.ORACLE_CONSISTENT

    def __post_init__(self):
        object.__setattr__(self, "signal_style", SignalStyle(self.signal_style))
        object.__setattr__(self, "dissipation_style", DissipationStyle(self.dissipation_style))
        object.__setattr__(self, "jump_convention", JumpConvention(self.jump_convention))


def signal_hamiltonian(params: SpinModelParams) -> np.ndarray:
    """Signal Hamiltonian (without the epsilon prefactor) in the (+1, 0, -1) basis."""
    h = (
        params.j_01 * SZ @ SPLUS / np.sqrt(2)
        - params.j_0m1 * SZ @ SMINUS / np.sqrt(2)
        + params.j_m11 * SPLUS @ SPLUS / 2
    )
    return h + h.conj().T


def spin_hamiltonian(params: SpinModelParams) -> np.ndarray:
    return params.delta * SZ + params.epsilon * signal_hamiltonian(params)


def signal_gate_params(j: complex, epsilon: float, dt: float, sign: int = 1):
    """U3 angles of the rotation exp(-i eps dt (j|1><0| + h.c.)).

    ``sign`` only selects which transition (+1 or -1) the gate drives; the angle
    formula is the same for both.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    arg = float(np.angle(j)) if j != 0 else 0.0
    theta = -2.0 * epsilon * abs(j) * dt
    return theta, arg - 1.5 * np.pi, -arg - 0.5 * np.pi


def effective_jump_probability(gamma: float, dt: float, convention=JumpConvention.ORACLE_CONSISTENT) -> float:
    """Per-step ancilla click probability for a spin relaxation rate ``gamma``.

    The spin jump operators have norm sqrt(2), so the qubit relaxation rate that
    reproduces the master equation is twice the spin rate.
    """
    factor = 2.0 if JumpConvention(convention) is JumpConvention.ORACLE_CONSISTENT else 1.0
    return factor * gamma * dt


def relaxation_angle(p: float) -> float:
    if not 0 <= p < 1:
        raise ValueError(f"jump probability {p} outside [0, 1)")
    return 2.0 * np.arcsin(np.sqrt(p))


def build_dissipation_subcircuit(
    gamma: float,
    dt: float,
    style=DissipationStyle.CCU,
    jump_convention=JumpConvention.ORACLE_CONSISTENT,
    system: int = 0,
    ancilla: int = 1,
    n_qubits: int | None = None,
    label: str = "D",
) -> QuantumCircuit:
    """Relaxation of ``system`` towards |0> through an ancilla measured and reset."""
    theta = relaxation_angle(effective_jump_probability(gamma, dt, jump_convention))
    q, a = system, ancilla
    n = n_qubits if n_qubits is not None else max(q, a) + 1
    circ = QuantumCircuit(n)
    if DissipationStyle(style) is DissipationStyle.CCU:
        circ.extend([cu3(theta, 0.0, 0.0, control=q, target=a), cnot(a, q)])
    else:
        circ.extend(
            [
                u3(np.pi / 2, -np.pi, 0.0, q),
                u3(-theta / 2, -np.pi / 2, np.pi, a),
                cnot(a, q),
                u3(np.pi / 2, -np.pi / 2, 0.0, q),
                u3(-theta / 2, np.pi, np.pi / 2, a),
                cnot(a, q),
                u1(-np.pi / 2, q),
                u1(-np.pi / 2, a),
            ]
        )
    circ.append(MeasureReset(a, label))
    return circ


def build_squeeze_subcircuit(j_m11: complex, epsilon: float, dt: float, n_qubits: int = 2) -> QuantumCircuit:
    """exp(-i eps dt (j|+1><-1| + h.c.)) from three controlled U3 gates.

    The outer CNOTs map |+1> = |10> onto |11>, so the pair becomes a q1 rotation
    conditioned on q0 = 1.
    """
    if j_m11 == 0:
        raise ValueError("squeezing step needs j_m11 != 0")
    theta, phi, lam = signal_gate_params(j_m11, epsilon, dt)
    return QuantumCircuit(
        n_qubits,
        [
            cnot(Q1, Q0),
            cu3(theta, phi, lam, control=Q0, target=Q1, polarity=Polarity.ON_ONE),
            cnot(Q1, Q0),
        ],
    )


def _signal_gates(j, epsilon, dt, target, control, style):
    theta, phi, lam = signal_gate_params(j, epsilon, dt)
    if style is SignalStyle.CONTROLLED:
        return [cu3(theta, phi, lam, control=control, target=target, polarity=Polarity.ON_ZERO)]
    return [u3(theta, phi, lam, target)]


def unitary_step_ops(params: SpinModelParams, variant: TrotterVariant, dt: float | None = None):
    """Gates of the unitary part of one step, as a symmetric (second-order) product.

    Terms: free precession, the +1 and -1 signal rotations and the squeezing
    rotation. Outer terms get half steps, the innermost a full step, so the
    per-step error is cubic in dt.
    """
    dt = params.dt if dt is None else dt
    style = SignalStyle(variant.signal_style)
    terms = []
    if params.delta != 0:
        terms.append(lambda h: [u1(-params.delta * h, Q1), u1(params.delta * h, Q0)])
    if params.epsilon != 0 and params.j_01 != 0:
        terms.append(lambda h: _signal_gates(params.j_01, params.epsilon, h, Q1, Q0, style))
    if params.epsilon != 0 and params.j_0m1 != 0:
        terms.append(lambda h: _signal_gates(params.j_0m1, params.epsilon, h, Q0, Q1, style))
    if params.epsilon != 0 and params.j_m11 != 0:
        terms.append(lambda h: build_squeeze_subcircuit(params.j_m11, params.epsilon, h).ops)
    if not terms:
        return []
    ops = []
    for term in terms[:-1]:
        ops.extend(term(dt / 2))
    ops.extend(terms[-1](dt))
    for term in reversed(terms[:-1]):
        ops.extend(term(dt / 2))
    return ops


def dissipation_channels(params: SpinModelParams):
    """(label, system qubit, spin rate) of every active relaxation channel."""
    chans = []
    if params.gamma_10 > 0:
        chans.append(("D+1", Q1, params.gamma_10))
    if params.gamma_m10 > 0:
        chans.append(("D-1", Q0, params.gamma_m10))
    return chans


def build_trotter_step(
    params: SpinModelParams,
    variant: TrotterVariant = TrotterVariant(),
    ancilla_indices=(ANCILLA, ANCILLA),
    step: int | None = None,
) -> QuantumCircuit:
    """One timestep: unitary part followed by the two relaxation subcircuits.

    ``ancilla_indices`` = (a1, a0) serve the +1 and -1 channels; they may coincide
    since every ancilla is reset after its measurement.
    """
    a1, a0 = ancilla_indices
    if {a1, a0} & {Q0, Q1}:
        raise ValueError("ancillas must not overlap the system qubits")
    chans = dissipation_channels(params)
    n = max([Q1] + ([a1, a0] if chans else [])) + 1
    circ = QuantumCircuit(n, unitary_step_ops(params, variant))
    suffix = "" if step is None else f"@{step}"
    for label, q, gamma in chans:
        anc = a1 if q == Q1 else a0
        sub = build_dissipation_subcircuit(
            gamma,
            params.dt,
            variant.dissipation_style,
            variant.jump_convention,
            system=q,
            ancilla=anc,
            n_qubits=n,
            label=label + suffix,
        )
        circ.extend(sub.ops)
    return circ


def exact_unitary(params: SpinModelParams, dt: float | None = None) -> np.ndarray:
    """exp(-i (Delta Sz + eps H_signal) dt) on the spin-1 space."""
    from scipy.linalg import expm

    dt = params.dt if dt is None else dt
    return expm(-1j * spin_hamiltonian(params) * dt)


def circuit_unitary_part(params: SpinModelParams, variant: TrotterVariant = TrotterVariant()) -> np.ndarray:
    """4x4 unitary of the gates of one step, relaxation excluded."""
    from .statevec import circuit_unitary

    return circuit_unitary(QuantumCircuit(2, unitary_step_ops(params, variant)))


def build_hardware_circuit(
    params: SpinModelParams, n_steps: int, variant: TrotterVariant = TrotterVariant(), max_steps: int = 4
) -> QuantumCircuit:
    """All ``n_steps`` steps in one circuit, with a fresh ancilla per step and channel.

    This mirrors devices without mid-circuit reset; each ancilla is measured only
    once, so the step count is bounded by the register size.
    """
    if n_steps > max_steps:
        raise ValueError(f"at most {max_steps} steps without ancilla reuse")
    n_chan = len(dissipation_channels(params))
    circ = QuantumCircuit(2 + n_chan * n_steps)
    for k in range(n_steps):
        base = ANCILLA + n_chan * k
        anc = (base, base + max(n_chan - 1, 0))
        circ.extend(build_trotter_step(params, variant, anc, step=k).ops)
    return circ
