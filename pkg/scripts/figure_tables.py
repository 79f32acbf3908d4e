"""Regenerate the plot-ready tables for every preset.

    python scripts/figure_tables.py --out results --engine oracle
    python scripts/figure_tables.py --engine both --trajectories 100000 --workers 8
"""

import argparse
from pathlib import Path

from qsync.experiments import PRESETS, preset_spec, run_preset, write_results
from qsync.noise import NoiseParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--engine", default="oracle", choices=("oracle", "trajectory", "both"))
    ap.add_argument("--trajectories", type=int, default=100_000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--noise", action="store_true", help="enable the default gate/readout noise")
    ap.add_argument("--only", nargs="*", choices=PRESETS)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only or PRESETS:
        spec = preset_spec(
            name,
            engine=args.engine,
            trajectories=args.trajectories,
            noise=NoiseParams() if args.noise else NoiseParams.off(),
        )
        table = run_preset(spec, workers=args.workers)
        path = out / f"{name}.csv"
        write_results(table, path)
        print(f"{name:28s} {len(table.rows):4d} rows -> {path}")


if __name__ == "__main__":
    main()
