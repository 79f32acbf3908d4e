"""Photon-counting trajectories of the Trotter circuit and their ensemble average.

Shots are simulated in vectorized blocks. Randomness is drawn from counter-based
streams keyed by (seed, trajectory, step, channel), and ensemble sums are formed
per fixed-size chunk and merged in chunk order, so results do not depend on the
number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import rng
from .noise import (
    NoiseParams,
    amplitude_damping_batch,
    apply_depolarizing_batch,
    apply_readout_flip,
)
from .spin1 import (
    Q0,
    Q1,
    SpinEncoding,
    SpinModelParams,
    TrotterVariant,
    build_trotter_step,
    encode_basis_state,
)
from .statevec import (
    MeasureReset,
    StateVector,
    collapse,
    flip_bit,
    gate_matrix,
    prob_one,
)

HARDWARE_MAX_STEPS = 4
DEFAULT_CHUNK = 8192
# channel ids for readout flips of the jump record, and for mixed-state sampling
_READOUT_CHANNEL_BASE = 32
_INIT_STEP = -1


@dataclass
class TrajectoryConfig:
    n_steps: int
    n_trajectories: int
    seed: int
    params: SpinModelParams
    variant: TrotterVariant = field(default_factory=TrotterVariant)
    initial_state: Union[str, int, StateVector, np.ndarray] = "0"
    noise: NoiseParams = field(default_factory=NoiseParams.off)
    hardware_faithful: bool = False
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.hardware_faithful and self.n_steps > HARDWARE_MAX_STEPS:
            raise ValueError(
                f"hardware-faithful mode allows at most {HARDWARE_MAX_STEPS} steps "
                "(one fresh ancilla per step and channel)"
            )


@dataclass
class ShotRecord:
    jump_log: np.ndarray  # (n_steps, n_channels) uint8
    final_state: StateVector
    channel_labels: tuple = ()

    def __eq__(self, other):
        return (
            isinstance(other, ShotRecord)
            and self.channel_labels == other.channel_labels
            and np.array_equal(self.jump_log, other.jump_log)
            and np.array_equal(self.final_state.amplitudes, other.final_state.amplitudes)
        )


@dataclass
class Accumulator:
    """Mergeable (sum, sum of squares, count) of outer products |psi><psi|."""

    total: np.ndarray
    sumsq_re: np.ndarray
    sumsq_im: np.ndarray
    count: int
    jumps: np.ndarray  # summed jump_log, (n_steps, n_channels)

    @classmethod
    def from_states(cls, amps: np.ndarray, jump_log: np.ndarray) -> "Accumulator":
        outer = amps[:, :, None] * amps[:, None, :].conj()
        return cls(
            outer.sum(axis=0),
            (outer.real**2).sum(axis=0),
            (outer.imag**2).sum(axis=0),
            len(amps),
            jump_log.sum(axis=0, dtype=np.int64),
        )

    def __add__(self, other: "Accumulator") -> "Accumulator":
        return Accumulator(
            self.total + other.total,
            self.sumsq_re + other.sumsq_re,
            self.sumsq_im + other.sumsq_im,
            self.count + other.count,
            self.jumps + other.jumps,
        )

    @property
    def mean(self) -> np.ndarray:
        return self.total / self.count


@dataclass
class EnsembleStats:
    mean_density: np.ndarray
    se_real: np.ndarray
    se_imag: np.ndarray
    n_samples: int
    jump_frequency: np.ndarray
    chunks: list = field(default_factory=list, repr=False)

    @property
    def standard_errors(self) -> np.ndarray:
        """Combined per-entry error, sqrt(se_re^2 + se_im^2)."""
        return np.hypot(self.se_real, self.se_imag)

    def batch_standard_error(self, fn, n_batches: int = 20) -> float:
        """Standard error of a nonlinear observable ``fn(rho)`` from batch means."""
        if self.n_samples < 2:
            return 0.0
        batches = _rebatch(self.chunks, n_batches)
        if len(batches) < 2:
            return 0.0
        vals = np.array([fn(acc.mean) for acc in batches], dtype=float)
        return float(vals.std(ddof=1) / np.sqrt(len(vals)))


def _rebatch(chunks, n_batches):
    n_batches = min(n_batches, len(chunks))
    if n_batches < 2:
        return list(chunks)
    groups = np.array_split(np.arange(len(chunks)), n_batches)
    out = []
    for g in groups:
        acc = chunks[g[0]]
        for i in g[1:]:
            acc = acc + chunks[i]
        out.append(acc)
    return out


def finalize(chunks: list, n_steps: int, n_channels: int) -> EnsembleStats:
    acc = chunks[0]
    for c in chunks[1:]:
        acc = acc + c
    n = acc.count
    mean = acc.mean
    mean = 0.5 * (mean + mean.conj().T)
    if n > 1:
        var_re = np.maximum(acc.sumsq_re / n - mean.real**2, 0.0) * n / (n - 1)
        var_im = np.maximum(acc.sumsq_im / n - mean.imag**2, 0.0) * n / (n - 1)
    else:
        var_re = var_im = np.zeros(mean.shape)
    jf = acc.jumps / n if n_steps and n_channels else np.zeros((n_steps, n_channels))
    return EnsembleStats(mean, np.sqrt(var_re / n), np.sqrt(var_im / n), n, jf, list(chunks))


def _initial_system(initial_state):
    """Return (pure amplitude vector, None) or (None, (eigvals, eigvecs))."""
    if isinstance(initial_state, StateVector):
        if initial_state.n_qubits != 2:
            raise ValueError("initial state must live on the two system qubits")
        return initial_state.amplitudes, None
    if isinstance(initial_state, (str, int)):
        return encode_basis_state(initial_state).amplitudes, None
    arr = np.asarray(initial_state, dtype=complex)
    if arr.shape == (4,):
        return arr / np.linalg.norm(arr), None
    if arr.shape == (4, 4):
        w, v = np.linalg.eigh(arr)
        w = np.clip(w, 0, None)
        w = w / w.sum()
        return None, (w, v)
    raise ValueError(f"cannot interpret initial state of shape {arr.shape}")


class _StepProgram:
    """One Trotter step compiled for batched execution.

    Without gate noise, maximal runs of gates are fused into one matrix.
    """

    def __init__(self, config: TrajectoryConfig):
        circ = build_trotter_step(config.params, config.variant)
        self.n = circ.n_qubits
        self.noise = config.noise
        noisy_gates = config.noise.enabled and (config.noise.p_1q > 0 or config.noise.p_cnot > 0)
        self.items = []
        self.labels = []
        pending = None
        for op in circ.ops:
            if isinstance(op, MeasureReset):
                if pending is not None:
                    self.items.append(("matrix", pending))
                    pending = None
                self.items.append(("measure", op.target, len(self.labels)))
                self.labels.append(op.label)
                continue
            m = gate_matrix(op, self.n)
            if noisy_gates:
                self.items.append(("matrix", m))
                err = config.noise.gate_error(op)
                if err is not None:
                    self.items.append(("depolarize",) + err)
            else:
                pending = m if pending is None else m @ pending
        if pending is not None:
            self.items.append(("matrix", pending))

    def run(self, amps, stream: rng.TrajectoryStream, jump_row: np.ndarray):
        for item in self.items:
            kind = item[0]
            if kind == "matrix":
                amps = amps @ item[1].T
            elif kind == "depolarize":
                _, qubits, p, reps = item
                for _ in range(reps):
                    amps = apply_depolarizing_batch(amps, qubits, p, stream.noise(), self.n)
            else:
                _, target, ch = item
                p1 = prob_one(amps, target, self.n)
                outcome = stream.channel(ch) < p1
                amps = collapse(amps, target, self.n, outcome)
                amps = flip_bit(amps, target, self.n, outcome)
                jump_row[:, ch] = outcome
        if self.noise.enabled and self.noise.p_damp > 0:
            for q in (Q1, Q0):
                amps = amplitude_damping_batch(amps, q, self.noise.p_damp, stream.noise(), self.n)
        return amps


def simulate_block(config: TrajectoryConfig, indices: np.ndarray):
    """Run the trajectories ``indices``; returns (final system amps, jump logs)."""
    indices = np.asarray(indices, dtype=np.int64)
    prog = _StepProgram(config)
    n_ch = len(prog.labels)
    b = len(indices)
    pure, mixed = _initial_system(config.initial_state)
    if pure is not None:
        sys_amps = np.broadcast_to(pure, (b, 4)).astype(complex)
    else:
        w, v = mixed
        u = rng.uniform(config.seed, indices, _INIT_STEP, 0)
        pick = np.minimum(np.searchsorted(np.cumsum(w), u, side="right"), len(w) - 1)
        sys_amps = v[:, pick].T.astype(complex)
    amps = np.zeros((b, 2**prog.n), dtype=complex)
    amps[:, :4] = sys_amps
    jumps = np.zeros((b, config.n_steps, n_ch), dtype=np.uint8)
    for step in range(config.n_steps):
        stream = rng.TrajectoryStream(config.seed, indices, step)
        amps = prog.run(amps, stream, jumps[:, step, :])
    if config.noise.enabled and (config.noise.p_read0 or config.noise.p_read1):
        for step in range(config.n_steps):
            for ch in range(n_ch):
                draw = rng.uniform(config.seed, indices, step, _READOUT_CHANNEL_BASE + ch)
                jumps[:, step, ch] = apply_readout_flip(
                    jumps[:, step, ch], config.noise.p_read0, config.noise.p_read1, draw
                )
    # ancillas are all back in |0>, i.e. the low four amplitudes carry the state
    return amps[:, :4], jumps, tuple(prog.labels)


def run_trajectory(config: TrajectoryConfig, trajectory_index: int) -> ShotRecord:
    amps, jumps, labels = simulate_block(config, np.array([trajectory_index]))
    return ShotRecord(jumps[0], StateVector(2, amps[0]), labels)


def _chunk_bounds(n: int, size: int):
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _run_chunk(config: TrajectoryConfig, lo: int, hi: int):
    amps, jumps, labels = simulate_block(config, np.arange(lo, hi))
    return Accumulator.from_states(amps, jumps), labels


def run_ensemble(config: TrajectoryConfig, workers: int = 1) -> EnsembleStats:
    """Average |psi><psi| over all trajectories of ``config``."""
    bounds = _chunk_bounds(config.n_trajectories, config.chunk_size)
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _run_chunk(config, *b), bounds))
    else:
        results = [_run_chunk(config, *b) for b in bounds]
    labels = results[0][1]
    return finalize([r[0] for r in results], config.n_steps, len(labels))


def ensemble_density_matrix(stats_or_rho, encoding=SpinEncoding):
    """Split a two-qubit state into the renormalized spin block and leakage terms.

    Returns ``(spin, leakage)`` where ``leakage`` holds ``rho_XX``, the coherences
    ``rho_kX`` for k = +1, 0, -1 and the raw spin-block trace.
    """
    rho = stats_or_rho.mean_density if isinstance(stats_or_rho, EnsembleStats) else np.asarray(stats_or_rho)
    rho_xx = float(rho[encoding.x_index, encoding.x_index].real)
    if rho_xx >= 1 - 1e-9:
        raise ValueError("state is (almost) entirely in |X>; spin block cannot be renormalized")
    block = encoding.spin_block(rho)
    raw_trace = float(np.trace(block).real)
    spin = block / (1 - rho_xx)
    idx = encoding.spin_indices
    leakage = {
        "rho_XX": rho_xx,
        "rho_kX": tuple(complex(rho[i, encoding.x_index]) for i in idx),
        "raw_trace": raw_trace,
    }
    return spin, leakage
