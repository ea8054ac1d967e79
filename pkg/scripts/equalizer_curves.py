"""Zero-shot accuracy versus number of anchors N and bit width q for PFE, FE and UPE.

    python3 scripts/equalizer_curves.py --out results/equalizer_curves.csv
"""
import argparse
import csv
from pathlib import Path

from semeq import sim
from semeq.world import baseline_accuracy, equalizer_for, evaluate_accuracy, support_for, train_centroid_decoder


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--N", default="8,16,32,64,128,256,384,512")
    ap.add_argument("--q", default="2,4,8,32")
    ap.add_argument("--methods", default="PFE,FE,UPE")
    ap.add_argument("--strategy", default="prototypical", choices=["prototypical", "uniform"])
    ap.add_argument("--out", default="results/equalizer_curves.csv")
    args = ap.parse_args()

    cfg = sim.load_config(args.config) if args.config else sim.ScenarioConfig()
    worlds = sim.build_worlds(cfg)
    decoder = train_centroid_decoder(worlds[0])
    seed = sim.derive_seed(cfg.seed, sim.ANCHORS)
    rows = [("absolute", k + 1, 0, 0, baseline_accuracy(w, decoder)) for k, w in enumerate(worlds)]
    for i, N in enumerate(int(v) for v in args.N.split(",")):
        support = support_for(worlds[0], N, args.strategy, cfg.world.M, seed + i)
        for method in args.methods.split(","):
            for k, w in enumerate(worlds):
                eq = equalizer_for(w, support, method)
                for q in (int(v) for v in args.q.split(",")):
                    rows.append((method, k + 1, N, q, evaluate_accuracy(w, decoder, eq, N, q)))
                print(f"{method:4s} user {k + 1} N={N:4d} " + " ".join(f"{r[4]:.3f}" for r in rows[-len(args.q.split(",")):]))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "user", "N", "q", "accuracy"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
