"""Purity and |0> population over 30 signal-only steps, with and without gate noise."""

import numpy as np

from qsync.density import evolve_density
from qsync.experiments import initial_density, observables_from_density, preset_spec
from qsync.noise import NoiseParams
from qsync.spin1 import TrotterVariant


def run(variant, noise):
    params = preset_spec("signal_only").params
    return [observables_from_density(r) for r in evolve_density(initial_density("0"), params, 30, variant, noise)]


def main():
    cnot_only = NoiseParams(p_cnot=0.02, p_1q=0.0, p_read0=0.0, p_read1=0.0)
    one_q = NoiseParams(p_cnot=0.0, p_1q=0.002, p_read0=0.0, p_read1=0.0)
    unc = TrotterVariant(signal_style="uncontrolled")
    ctrl = run(TrotterVariant(), cnot_only)
    ideal = run(unc, None)
    light = run(unc, one_q)
    print("step  purity(controlled, p_cnot=.02)  P0 ideal  P0 uncontrolled p_1q=.002")
    for n in range(0, 31, 3):
        print(f"{n:4d}  {ctrl[n]['purity']:.4f}  {ideal[n]['p_0']:.4f}  {light[n]['p_0']:.4f}")
    dev = max(abs(a["p_0"] - b["p_0"]) for a, b in zip(ideal, light))
    print(f"max |dP0| uncontrolled: {dev:.4f}")
    print(f"controlled purity strictly decreasing: {bool(np.all(np.diff([c['purity'] for c in ctrl]) < 0))}")


if __name__ == "__main__":
    main()
