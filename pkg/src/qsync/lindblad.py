"""Reference density-matrix integration of the spin-1 master equation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .density import evolve_density
from .spin1 import (
    Q0,
    Q1,
    SMINUS,
    SPLUS,
    SZ,
    SignalStyle,
    SpinEncoding,
    SpinModelParams,
    TrotterVariant,
    circuit_unitary_part,
    spin_hamiltonian,
)


@dataclass
class LindbladModel:
    hamiltonian: np.ndarray
    jump_ops: list = field(default_factory=list)  # (operator, rate)

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        if not np.allclose(h, h.conj().T, atol=1e-12):
            raise ValueError("Hamiltonian is not Hermitian")
        for op, rate in self.jump_ops:
            if rate < 0:
                raise ValueError("jump rates must be non-negative")
            if np.shape(op) != h.shape:
                raise ValueError("jump operator shape does not match the Hamiltonian")
        self.hamiltonian = h

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def spin_model(params: SpinModelParams) -> LindbladModel:
    """Three-level model: precession, signal, and relaxation towards |0>."""
    return LindbladModel(
        spin_hamiltonian(params),
        [(SPLUS @ SZ, params.gamma_m10), (SMINUS @ SZ, params.gamma_10)],
    )


def _lowering(qubit: int) -> np.ndarray:
    idx = np.arange(4)
    m = np.zeros((4, 4), dtype=complex)
    up = idx[(idx >> qubit) & 1 == 1]
    m[up ^ (1 << qubit), up] = 1.0
    return m


def _raising_term(j: complex, qubit: int) -> np.ndarray:
    """j |1><0| + h.c. on one qubit, identity on the other."""
    h = j * _lowering(qubit).conj().T
    return h + h.conj().T


def encoded_model(params: SpinModelParams, signal_style=SignalStyle.CONTROLLED) -> LindbladModel:
    """Four-level model on the two encoding qubits.

    Relaxation acts as independent qubit decay at twice the spin rates. With the
    controlled signal |X> is untouched by the Hamiltonian; the uncontrolled form
    drives each qubit on its own and so couples to |X>.
    """
    enc = SpinEncoding
    if SignalStyle(signal_style) is SignalStyle.CONTROLLED:
        h = enc.embed(spin_hamiltonian(params))
    else:
        sz = enc.embed(SZ)
        h = params.delta * sz + params.epsilon * (
            _raising_term(params.j_01, Q1) + _raising_term(params.j_0m1, Q0)
        )
        if params.j_m11 != 0:
            sig = np.zeros((3, 3), dtype=complex)
            sig[0, 2] = params.j_m11
            h = h + params.epsilon * enc.embed(sig + sig.conj().T)
    return LindbladModel(
        h,
        [(_lowering(Q1), 2 * params.gamma_10), (_lowering(Q0), 2 * params.gamma_m10)],
    )


def lindblad_rhs(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != model.hamiltonian.shape:
        raise ValueError(f"rho has shape {rho.shape}, model needs {model.hamiltonian.shape}")
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for op, rate in model.jump_ops:
        if rate == 0:
            continue
        opd = op.conj().T
        odo = opd @ op
        out = out + rate * (op @ rho @ opd - 0.5 * (odo @ rho + rho @ odo))
    return out


def _rk4(model, rho, h, n):
    for _ in range(n):
        k1 = lindblad_rhs(model, rho)
        k2 = lindblad_rhs(model, rho + 0.5 * h * k1)
        k3 = lindblad_rhs(model, rho + 0.5 * h * k2)
        k4 = lindblad_rhs(model, rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
    return rho


def integrate_lindblad(
    model: LindbladModel,
    rho0: np.ndarray,
    T: float,
    tol: float = 1e-10,
    max_steps: int = 1 << 18,
) -> np.ndarray:
    """RK4 with step doubling until two successive results agree to ``tol``."""
    if T < 0:
        raise ValueError("T must be >= 0")
    rho0 = np.asarray(rho0, dtype=complex)
    if T == 0:
        return rho0.copy()
    scale = max(np.abs(model.hamiltonian).max(), sum(r * np.abs(op).max() ** 2 for op, r in model.jump_ops), 1e-12)
    n = max(8, int(np.ceil(T * scale / 0.1)))
    coarse = _rk4(model, rho0, T / n, n)
    while n <= max_steps:
        fine = _rk4(model, rho0, T / (2 * n), 2 * n)
        if np.max(np.abs(fine - coarse)) < tol:
            check_density(fine, atol=max(1e-10, 10 * tol))
            return fine
        coarse, n = fine, 2 * n
    raise RuntimeError(f"tolerance {tol} not reached within {max_steps} RK4 steps")


def evolve_lindblad(model: LindbladModel, rho0, times, tol: float = 1e-10) -> list:
    """States at each of the increasing ``times`` (starting from t = 0)."""
    out, rho, t_prev = [], np.asarray(rho0, dtype=complex), 0.0
    for t in times:
        rho = integrate_lindblad(model, rho, t - t_prev, tol)
        out.append(rho)
        t_prev = t
    return out


def check_density(rho: np.ndarray, atol: float = 1e-10) -> None:
    """Raise ValueError unless ``rho`` is Hermitian, unit-trace and PSD (to ``atol``)."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > max(atol, 1e-12):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > max(atol, 1e-12):
        raise ValueError(f"trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise ValueError("density matrix has a negative eigenvalue")


def basis_projector(dim: int, index: int) -> np.ndarray:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[index, index] = 1.0
    return rho


def _fit_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _probe_states():
    """Spin basis projectors plus superpositions that expose coherences."""
    vecs = [np.eye(4)[i] for i in (0, 1, 2)]
    vecs += [
        np.array([1, 1, 0, 0]) / np.sqrt(2),
        np.array([1, 0, 1j, 0]) / np.sqrt(2),
        np.array([0, 1, 1, 0]) / np.sqrt(2),
        np.array([1, 1, 1, 0]) / np.sqrt(3),
    ]
    return [np.outer(v, v.conj()).astype(complex) for v in vecs]


def trotter_error_scan(params: SpinModelParams, dt_grid, variant: TrotterVariant = TrotterVariant(), dissipative: bool | None = None):
    """Per-step error of the Trotter circuit against the exact dynamics.

    Without relaxation the comparison is the operator-norm distance of the unitary
    part from exp(-iH dt) on the spin subspace. With relaxation it is the largest
    trace-norm distance over a fixed set of probe states after one step, against
    the encoded master equation.

    Returns ``(dt, error)`` arrays and the fitted log-log slope.
    """
    from scipy.linalg import expm

    dt_grid = np.asarray(sorted(dt_grid), dtype=float)
    if dissipative is None:
        dissipative = params.gamma_10 > 0 or params.gamma_m10 > 0
    errs = []
    for dt in dt_grid:
        p = params.with_(dt=float(dt))
        if not dissipative:
            u_circ = SpinEncoding.spin_block(circuit_unitary_part(p, variant))
            u_exact = expm(-1j * spin_hamiltonian(p) * dt)
            errs.append(np.linalg.norm(u_circ - u_exact, 2))
        else:
            model = encoded_model(p)
            worst = 0.0
            for rho0 in _probe_states():
                circ = evolve_density(rho0, p, 1, variant)[-1]
                exact = integrate_lindblad(model, rho0, dt, tol=1e-13)
                worst = max(worst, np.abs(np.linalg.eigvalsh(circ - exact)).sum())
            errs.append(worst)
    errs = np.array(errs)
    return dt_grid, errs, _fit_slope(dt_grid, errs)
