"""Frequency of the selected anchor count N and bit width q per user.

Reads an existing trace CSV when given, otherwise runs the scenario first.

    python3 scripts/decision_histograms.py --trace results/trace.csv
"""
import argparse
import csv
from dataclasses import replace
from pathlib import Path

from semeq import sim


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--trace")
    ap.add_argument("--slots", type=int)
    ap.add_argument("--out", default="results/histograms.csv")
    args = ap.parse_args()

    cfg = sim.load_config(args.config) if args.config else sim.ScenarioConfig()
    if args.slots:
        cfg = replace(cfg, T_slots=args.slots)
    if args.trace:
        hist = sim.histogram_from_rows(sim.parse_trace_csv(Path(args.trace).read_text()), cfg.N_set, cfg.Q_set)
    else:
        hist = sim.decision_histogram(sim.run_simulation(cfg), cfg.N_set, cfg.Q_set)
    rows = sim.histogram_rows(hist)
    for user, axis, value, freq in rows:
        if freq > 0:
            print(f"user {user} {axis}={value:<4} {freq:.3f}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "axis", "value", "frequency"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
