"""Log-log exponents behind the scaling checks: signal strength, leakage, Trotter order."""

import numpy as np

from qsync.density import evolve_density
from qsync.experiments import initial_density, oracle_density, observables_from_density, preset_spec
from qsync.lindblad import trotter_error_scan
from qsync.spin1 import SpinEncoding, SpinModelParams, TrotterVariant


def fit(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def strength(n_steps_list=(1, 2, 3, 4)):
    eps = np.round(np.arange(0.05, 0.401, 0.05), 12)
    base = preset_spec("strength_scan").params
    print("signal strength (oracle), slopes vs eps in [0.05, 0.4]")
    for n in n_steps_list:
        ref = observables_from_density(oracle_density(base.with_(epsilon=0.0), n, "0"))
        obs = [observables_from_density(oracle_density(base.with_(epsilon=float(e)), n, "0")) for e in eps]
        r10 = fit(eps, [o["abs_r10"] for o in obs])
        rm11 = fit(eps, [o["abs_rm11"] for o in obs])
        dp0 = fit(eps, [abs(o["p_0"] - ref["p_0"]) for o in obs])
        print(f"  N={n}: |r10| {r10:.3f}  |r-11| {rm11:.3f}  dP0 {dp0:.3f}")


def leakage():
    eps = np.array([0.05, 0.1, 0.2, 0.4])
    base = preset_spec("leakage_check").params
    unc = TrotterVariant(signal_style="uncontrolled")
    finals = [evolve_density(initial_density("0"), base.with_(epsilon=float(e)), 4, unc)[-1] for e in eps]
    x = SpinEncoding.x_index
    print("leakage, uncontrolled signal, N=4")
    for label, idx in zip(("+1", "0", "-1"), SpinEncoding.spin_indices):
        print(f"  |r_{label},X| exponent {fit(eps, [abs(r[idx, x]) for r in finals]):.3f}")
    print(f"  r_XX exponent {fit(eps, [r[x, x].real for r in finals]):.3f}")


def trotter():
    p = SpinModelParams(
        delta=0.7, epsilon=1.0, j_01=2 * np.exp(-1j * np.pi / 6), j_0m1=2 * np.exp(2j * np.pi / 6), j_m11=0.8j
    )
    print(f"unitary Trotter slope {trotter_error_scan(p, np.logspace(-3, -1, 9))[2]:.3f}")
    pd = p.with_(gamma_10=0.5, gamma_m10=0.5)
    print(f"dissipative step slope {trotter_error_scan(pd, np.logspace(-2.5, -1, 6))[2]:.3f}")


if __name__ == "__main__":
    strength()
    leakage()
    trotter()
