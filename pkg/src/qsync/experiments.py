"""Observables, preset experiments and tabular output.

Preset rates are quoted as circuit jump rates Gamma_eff = 2 Gamma_{k,0}, in units
where Gamma_eff of the +1 channel is 1. ``Gamma_eff dt = 0.2`` becomes ``dt = 0.2``
with ``gamma_10 = 0.5`` in ``SpinModelParams``.
"""

from __future__ import annotations

import csv
import io
import json
import subprocess
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .lindblad import encoded_model, integrate_lindblad
from .noise import NoiseParams
from .spin1 import (
    SpinEncoding,
    SpinModelParams,
    TrotterVariant,
    encode_basis_state,
)
from .trajectory import TrajectoryConfig, ensemble_density_matrix, run_ensemble

PHI_POINTS = 256
OBSERVABLES = (
    "p_p1",
    "p_0",
    "p_m1",
    "p_X",
    "abs_r10",
    "arg_r10",
    "abs_r0m1",
    "arg_r0m1",
    "abs_rm11",
    "arg_r1m1",
    "abs_sum",
    "abs_r1X",
    "abs_r0X",
    "abs_rm1X",
    "S_max",
    "argmax_phi",
    "purity",
)


class PhaseDistribution(NamedTuple):
    phi: np.ndarray
    S: np.ndarray
    S_max: float
    argmax: float


def _s_of_phi(phi, a, b):
    return (3 / (8 * np.sqrt(2))) * np.abs(a) * np.cos(phi + np.angle(a)) + (
        1 / (2 * np.pi)
    ) * np.abs(b) * np.cos(2 * phi + np.angle(b))


def phase_distribution(rho: np.ndarray, phi_grid=None) -> PhaseDistribution:
    """Phase distribution of a 3x3 spin state and its maximum.

    The maximum is refined off-grid with a bounded scalar search around the best
    grid point.
    """
    rho = np.asarray(rho)
    phi = np.linspace(0, 2 * np.pi, PHI_POINTS, endpoint=False) if phi_grid is None else np.asarray(phi_grid, dtype=float)
    a = rho[0, 1] + rho[1, 2]
    b = rho[0, 2]
    s = _s_of_phi(phi, a, b)
    if abs(a) == 0 and abs(b) == 0:
        return PhaseDistribution(phi, s, 0.0, 0.0)
    k = int(np.argmax(s))
    step = 2 * np.pi / PHI_POINTS
    res = minimize_scalar(
        lambda x: -_s_of_phi(x, a, b),
        bounds=(phi[k] - step, phi[k] + step),
        method="bounded",
        options={"xatol": 1e-10},
    )
    best = float(res.x) % (2 * np.pi)
    s_best = float(-res.fun)
    if s_best < s[k]:
        best, s_best = float(phi[k]), float(s[k])
    return PhaseDistribution(phi, s, s_best, best)


def observables_from_density(rho_2q: np.ndarray) -> dict:
    """Named spin and leakage observables of a two-qubit state."""
    rho_2q = np.asarray(rho_2q)
    spin, leak = ensemble_density_matrix(rho_2q)
    pd = phase_distribution(spin)
    r10, r0m1, r1m1 = spin[0, 1], spin[1, 2], spin[0, 2]
    k1x, k0x, km1x = leak["rho_kX"]
    return {
        "p_p1": float(spin[0, 0].real),
        "p_0": float(spin[1, 1].real),
        "p_m1": float(spin[2, 2].real),
        "p_X": leak["rho_XX"],
        "abs_r10": float(abs(r10)),
        "arg_r10": float(np.angle(r10)),
        "abs_r0m1": float(abs(r0m1)),
        "arg_r0m1": float(np.angle(r0m1)),
        "abs_rm11": float(abs(r1m1)),
        "arg_r1m1": float(np.angle(r1m1)),
        "abs_sum": float(abs(r10 + r0m1)),
        "abs_r1X": float(abs(k1x)),
        "abs_r0X": float(abs(k0x)),
        "abs_rm1X": float(abs(km1x)),
        "S_max": pd.S_max,
        "argmax_phi": pd.argmax,
        "purity": float(np.real(np.trace(spin @ spin))),
    }


def noise_floor(rho_2q_eps0: np.ndarray) -> float:
    """Largest spin-coherence modulus of a reference run without signal."""
    spin, _ = ensemble_density_matrix(rho_2q_eps0)
    return float(max(abs(spin[0, 1]), abs(spin[1, 2]), abs(spin[0, 2])))


# presets ---------------------------------------------------------------------

PRESETS = (
    "signal_only",
    "stabilization",
    "onset",
    "detuning_scan",
    "strength_scan",
    "phase_scan_global",
    "blockade_scan",
    "leakage_check",
    "stabilization_from_excited",
)

GRID_EXTRAS = ("chi", "n_steps")
PARAM_FIELDS = tuple(SpinModelParams.__dataclass_fields__)


def polar(r: float, angle: float) -> complex:
    return complex(r * np.exp(1j * angle))


@dataclass
class ExperimentSpec:
    preset: str
    params: SpinModelParams
    grid_name: str
    grid: tuple
    n_steps: int = 3
    trajectories: int = 100_000
    seed: int = 20191007
    noise: NoiseParams = field(default_factory=NoiseParams.off)
    engine: str = "oracle"
    variant: TrotterVariant = field(default_factory=TrotterVariant)
    initial_states: tuple = ("0",)
    chi_mode: str = "global"
    hardware_faithful: bool = False

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.grid_name not in PARAM_FIELDS + GRID_EXTRAS:
            raise ValueError(f"invalid grid parameter {self.grid_name!r}")
        if self.engine not in ("trajectory", "oracle", "both"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.chi_mode not in ("global", "blockade"):
            raise ValueError(f"unknown chi mode {self.chi_mode!r}")
        self.grid = tuple(self.grid)
        self.initial_states = tuple(str(s) for s in self.initial_states)


# Caption rates are the circuit's per-step jump rates, Gamma_eff = 2 Gamma_{k,0}.
# Units: Gamma_eff for the +1 channel is 1, so Gamma_eff dt = 0.2 as on hardware.
_G = 0.5


def _rates(ratio: float = 1.0) -> dict:
    return dict(gamma_10=_G, gamma_m10=ratio * _G, dt=0.2, epsilon=0.25)


_FIG3 = dict(_rates(), j_0m1=polar(2, 2 * np.pi / 6), j_01=polar(2, -np.pi / 6))
_FIG3C = dict(_rates(1.25), j_0m1=polar(2, -2 * np.pi / 6), j_01=polar(2, -2 * np.pi / 6))
_STAB = _rates()
_ONSET = dict(_STAB, j_0m1=polar(1, 2 * np.pi / 6), j_01=polar(2, -np.pi / 6))


def preset_spec(name: str, **overrides) -> ExperimentSpec:
    """Default spec of a preset, with figure-caption parameters."""
    chi_grid = tuple(np.linspace(0, 2 * np.pi, 49))
    steps4 = tuple(range(5))
    table = {
        "signal_only": dict(
            params=SpinModelParams(
                epsilon=1.0, dt=0.1, j_0m1=polar(0.5, -np.pi / 6), j_01=polar(1, 5 * np.pi / 6)
            ),
            grid_name="n_steps",
            grid=tuple(range(31)),
        ),
        "stabilization": dict(params=SpinModelParams(**_STAB), grid_name="n_steps", grid=steps4),
        "onset": dict(params=SpinModelParams(**_ONSET), grid_name="n_steps", grid=steps4),
        "detuning_scan": dict(
            params=SpinModelParams(**_FIG3), grid_name="delta", grid=tuple(np.round(np.linspace(-1, 1, 21), 12))
        ),
        "strength_scan": dict(
            params=SpinModelParams(**_FIG3), grid_name="epsilon", grid=tuple(np.round(np.arange(0, 0.401, 0.05), 12))
        ),
        "phase_scan_global": dict(params=SpinModelParams(**_FIG3C), grid_name="chi", grid=chi_grid),
        "blockade_scan": dict(
            params=SpinModelParams(**_FIG3C), grid_name="chi", grid=chi_grid, chi_mode="blockade"
        ),
        "leakage_check": dict(
            params=SpinModelParams(**_ONSET),
            grid_name="n_steps",
            grid=steps4,
            variant=TrotterVariant(signal_style="uncontrolled"),
        ),
        "stabilization_from_excited": dict(
            params=SpinModelParams(**_STAB), grid_name="n_steps", grid=steps4, initial_states=("+1", "-1", "X")
        ),
    }
    if name not in table:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    kwargs = dict(table[name])
    kwargs.update(overrides)
    return ExperimentSpec(preset=name, **kwargs)


def apply_chi(params: SpinModelParams, chi: float, mode: str) -> SpinModelParams:
    """Signal phase shift.

    ``global`` rotates the semiclassical signal as a whole, j_{0,+-1} ->
    exp(+-i chi) j_{0,+-1}, which turns both rho_{1,0} and rho_{0,-1} by chi.
    ``blockade`` shifts only the -1 component, j_{0,-1} -> exp(i chi) j_{0,-1}.
    """
    w = np.exp(1j * chi)
    if mode == "global":
        return params.with_(j_01=complex(params.j_01 * w), j_0m1=complex(params.j_0m1 / w))
    return params.with_(j_0m1=complex(params.j_0m1 * w))


def point_params(spec: ExperimentSpec, value) -> tuple:
    """(params, n_steps) for one grid value."""
    if spec.grid_name == "n_steps":
        return spec.params, int(value)
    if spec.grid_name == "chi":
        return apply_chi(spec.params, float(value), spec.chi_mode), spec.n_steps
    return spec.params.with_(**{spec.grid_name: value}), spec.n_steps


def initial_density(label: str) -> np.ndarray:
    return encode_basis_state(label).density_matrix()


def oracle_density(params: SpinModelParams, n_steps: int, initial: str, tol: float = 1e-11) -> np.ndarray:
    return integrate_lindblad(encoded_model(params), initial_density(initial), n_steps * params.dt, tol)


def _trajectory_config(spec, params, n_steps, initial) -> TrajectoryConfig:
    return TrajectoryConfig(
        n_steps=n_steps,
        n_trajectories=spec.trajectories,
        seed=spec.seed,
        params=params,
        variant=spec.variant,
        initial_state=initial,
        noise=spec.noise,
        hardware_faithful=spec.hardware_faithful,
        chunk_size=max(64, -(-spec.trajectories // 32)),
    )


def discrepancy_tolerance(se: float, n_steps: int, dt: float) -> float:
    """3 sigma, or the expected Trotter bias 5 N dt^3 when that is larger."""
    return max(3 * se, 5 * n_steps * dt**3)


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    def __eq__(self, other):
        return (
            isinstance(other, ResultTable)
            and self.columns == other.columns
            and self.provenance == other.provenance
            and self.rows == other.rows
        )


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _provenance(spec: ExperimentSpec) -> dict:
    p = {k: (repr(v) if isinstance(v, complex) else v) for k, v in asdict(spec.params).items()}
    return {
        "preset": spec.preset,
        "engine": spec.engine,
        "seed": spec.seed,
        "trajectories": spec.trajectories,
        "convention": spec.variant.jump_convention.value,
        "signal_style": spec.variant.signal_style.value,
        "dissipation_style": spec.variant.dissipation_style.value,
        "noise": json.dumps(asdict(spec.noise), sort_keys=True),
        "hardware_faithful": spec.hardware_faithful,
        "chi_mode": spec.chi_mode,
        "params": json.dumps(p, sort_keys=True),
        "git_describe": _git_describe(),
    }


def _floor_params(params: SpinModelParams) -> SpinModelParams:
    return params.with_(epsilon=0.0)


def run_preset(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Evaluate every grid point (and initial state) with the selected engine(s)."""
    engines = ("traj", "oracle") if spec.engine == "both" else (
        ("traj",) if spec.engine == "trajectory" else ("oracle",)
    )
    cols = ["initial_state", spec.grid_name] + ([] if spec.grid_name == "n_steps" else ["n_steps"])
    for e in engines:
        for name in OBSERVABLES + ("noise_floor",):
            cols.append(f"{e}_{name}")
            if e == "traj":
                cols.append(f"{e}_{name}_se")
    if spec.engine == "both":
        cols += [f"flag_{name}" for name in OBSERVABLES]

    floor_cache: dict = {}
    table = ResultTable(cols, [], _provenance(spec))
    for initial in spec.initial_states:
        for value in spec.grid:
            params, n_steps = point_params(spec, value)
            row = {"initial_state": initial, spec.grid_name: value, "n_steps": n_steps}
            results = {}
            for e in engines:
                obs, ses, floor, floor_se = _evaluate(spec, e, params, n_steps, initial, workers, floor_cache)
                results[e] = (obs, ses)
                for name in OBSERVABLES:
                    row[f"{e}_{name}"] = obs[name]
                    if e == "traj":
                        row[f"{e}_{name}_se"] = ses[name]
                row[f"{e}_noise_floor"] = floor
                if e == "traj":
                    row[f"{e}_noise_floor_se"] = floor_se
            if spec.engine == "both":
                (t_obs, t_se), (o_obs, _) = results["traj"], results["oracle"]
                for name in OBSERVABLES:
                    tol = discrepancy_tolerance(t_se[name], n_steps, params.dt)
                    diff = abs(t_obs[name] - o_obs[name])
                    if name.startswith("arg") or name == "argmax_phi":
                        diff = abs((diff + np.pi) % (2 * np.pi) - np.pi)
                    row[f"flag_{name}"] = int(diff > tol)
            table.rows.append([_plain(row[c]) for c in cols])
    return table


def _plain(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    return v


def _evaluate(spec, engine, params, n_steps, initial, workers, floor_cache):
    if engine == "oracle":
        obs = observables_from_density(oracle_density(params, n_steps, initial))
        key = ("oracle", _floor_params(params), n_steps, initial)
        if key not in floor_cache:
            floor_cache[key] = noise_floor(oracle_density(_floor_params(params), n_steps, initial))
        return obs, None, floor_cache[key], None

    stats = run_ensemble(_trajectory_config(spec, params, n_steps, initial), workers=workers)
    obs = observables_from_density(stats.mean_density)
    ses = {
        name: stats.batch_standard_error(lambda r, n=name: observables_from_density(r)[n])
        for name in OBSERVABLES
    }
    key = ("traj", _floor_params(params), n_steps, initial)
    if key not in floor_cache:
        fstats = run_ensemble(_trajectory_config(spec, _floor_params(params), n_steps, initial), workers=workers)
        floor_cache[key] = (noise_floor(fstats.mean_density), fstats.batch_standard_error(noise_floor))
    floor, floor_se = floor_cache[key]
    return obs, ses, floor, floor_se


# output ----------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(s: str):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def results_to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    for k in sorted(table.provenance):
        buf.write(f"# {k}: {table.provenance[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_results(table: ResultTable, path, format: str = "csv") -> None:
    path = Path(path)
    if format == "csv":
        path.write_text(results_to_csv(table))
    elif format == "json":
        path.write_text(
            json.dumps({"provenance": table.provenance, "columns": table.columns, "rows": table.rows}, indent=1)
            + "\n"
        )
    else:
        raise ValueError(f"unknown format {format!r}")


def _parse_provenance_value(s: str):
    v = _parse(s)
    if s in ("True", "False"):
        return s == "True"
    return v


def read_results(path) -> ResultTable:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        data = json.loads(text)
        return ResultTable(data["columns"], data["rows"], data["provenance"])
    prov, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            prov[key] = _parse_provenance_value(value)
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    text_cols = {i for i, c in enumerate(columns) if c == "initial_state"}
    rows = [[c if i in text_cols else _parse(c) for i, c in enumerate(r)] for r in reader]
    return ResultTable(columns, rows, prov)


def spec_with(spec: ExperimentSpec, **changes) -> ExperimentSpec:
    return replace(spec, **changes)
