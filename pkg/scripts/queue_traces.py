"""Run the default scenario and write the per-slot trace plus running averages of L, G and Z(t)/t.

    python3 scripts/queue_traces.py --slots 7500 --out results/trace.csv
"""
import argparse
import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from semeq import sim


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--slots", type=int)
    ap.add_argument("--every", type=int, default=10, help="stride of the running-average file")
    ap.add_argument("--out", default="results/trace.csv")
    args = ap.parse_args()

    cfg = sim.load_config(args.config) if args.config else sim.ScenarioConfig()
    if args.slots:
        cfg = replace(cfg, T_slots=args.slots)
    trace = sim.run_simulation(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sim.write_trace(trace, out)

    t = np.arange(1, len(trace) + 1)
    L = trace.running_mean("L")
    G = trace.running_mean("G")
    Z = trace.series("Z")
    with open(out.with_name(out.stem + "_running.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mean_L", *[f"mean_G_{k + 1}" for k in range(cfg.n_users)], "Z_over_t"])
        for i in range(args.every - 1, len(t), args.every):
            w.writerow([int(t[i]), L[i], *G[i], Z[i] / t[i]])

    for key, val in trace.summary().items():
        print(f"{key:24s} {val}")


if __name__ == "__main__":
    main()
