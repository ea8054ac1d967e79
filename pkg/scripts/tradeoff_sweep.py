"""Average power and per-user bit-load over a grid of latency and accuracy targets.

    python3 scripts/tradeoff_sweep.py --jobs 4 --out results/tradeoff.csv
"""
import argparse
from dataclasses import replace
from pathlib import Path

from semeq import sim


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--latency-targets", default="0.02,0.03,0.04,0.06,0.08")
    ap.add_argument("--accuracy-targets", default="0.65,0.7,0.75")
    ap.add_argument("--slots", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/tradeoff.csv")
    args = ap.parse_args()

    cfg = sim.load_config(args.config) if args.config else sim.ScenarioConfig()
    if args.slots:
        cfg = replace(cfg, T_slots=args.slots)
    cells = sim.sweep(
        cfg,
        [float(v) for v in args.latency_targets.split(",")],
        [float(v) for v in args.accuracy_targets.split(",")],
        jobs=args.jobs,
    )
    for c in sorted(cells, key=lambda c: (c.G_bar, c.L_bar)):
        if c.ok:
            print(f"Lbar={c.L_bar:<5} Gbar={c.G_bar:<5} power={c.mean_p_last:.4f} W  bit-load={[round(b) for b in c.bitload]}")
        else:
            print(f"Lbar={c.L_bar:<5} Gbar={c.G_bar:<5} failed: {c.error}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sim.sweep_csv(cells, cfg.n_users))


if __name__ == "__main__":
    main()
