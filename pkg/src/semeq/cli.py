"""Command-line entry point: ``semeq <subcommand> [--config cfg.json] [--seed N] [--out path]``.

Exit codes: 0 success, 2 run completed but constraints not met, 1 error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import sim
from .equalize import AnchorSpec, prototypical_anchors, uniform_support
from .world import (
    baseline_accuracy,
    equalizer_for,
    evaluate_accuracy,
    read_emb1,
    support_for,
    train_centroid_decoder,
    write_emb1,
    write_labels,
)

log = logging.getLogger("semeq")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _config(args) -> sim.ScenarioConfig:
    cfg = sim.load_config(args.config) if args.config else sim.ScenarioConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "slots", None):
        cfg = replace(cfg, T_slots=args.slots)
    if getattr(args, "table", None):
        cfg = replace(cfg, world=replace(cfg.world, table_csv=args.table))
    return cfg


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _rows_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(v if isinstance(v, str) else repr(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_gen_world(args):
    cfg = _config(args)
    out = Path(args.out or "world")
    out.mkdir(parents=True, exist_ok=True)
    worlds = sim.build_worlds(cfg)
    write_emb1(out / "rx.emb1", worlds[0].rx)
    write_labels(out / "labels.csv", worlds[0].labels)
    for k, w in enumerate(worlds):
        write_emb1(out / f"tx_{k + 1}.emb1", w.tx)
    log.info("wrote %d user worlds to %s", len(worlds), out)
    return EXIT_OK


def cmd_anchors(args):
    X = read_emb1(args.embeddings)
    seed = 0 if args.seed is None else args.seed
    if args.strategy == "prototypical":
        sets, anchors = prototypical_anchors(X, AnchorSpec("prototypical", args.N, args.M, seed))
    else:
        idx = uniform_support(X.shape[0], args.N, seed)
        sets, anchors = [[i] for i in idx], X[idx]
    out = Path(args.out or "anchors.emb1")
    write_emb1(out, anchors)
    with open(out.with_suffix(".support.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["anchor", "sample"])
        for a, s in enumerate(sets):
            w.writerows([a, int(i)] for i in s)
    return EXIT_OK


def cmd_equalize_eval(args):
    cfg = _config(args)
    worlds = sim.build_worlds(cfg)
    decoder = train_centroid_decoder(worlds[0])
    N_set = _ints(args.N) if args.N else cfg.N_set
    Q_set = _ints(args.q) if args.q else cfg.Q_set
    methods = args.methods.split(",")
    seed = sim.derive_seed(cfg.seed, sim.ANCHORS)
    rows = []
    for k, w in enumerate(worlds):
        rows.append(["absolute", k + 1, 0, 0, baseline_accuracy(w, decoder)])
    for i, N in enumerate(N_set):
        support = support_for(worlds[0], N, args.strategy, cfg.world.M, seed + i)
        for method in methods:
            for k, w in enumerate(worlds):
                eq = equalizer_for(w, support, method)
                rows += [[method, k + 1, N, q, evaluate_accuracy(w, decoder, eq, N, q)] for q in Q_set]
    _emit(_rows_csv(["method", "user", "N", "q", "accuracy"], rows), args.out)
    return EXIT_OK


def cmd_accuracy_table(args):
    cfg = _config(args)
    table = sim.build_table(cfg)
    table.to_csv(args.out or "accuracy_table.csv")
    return EXIT_OK


def cmd_simulate(args):
    cfg = _config(args)
    trace = sim.run_simulation(cfg)
    if args.out:
        sim.write_trace(trace, args.out)
    summary = trace.summary()
    print(json.dumps(summary, indent=2))
    return EXIT_INFEASIBLE if trace.constraint_infeasible else EXIT_OK


def cmd_sweep(args):
    cfg = _config(args)
    cells = sim.sweep(cfg, _floats(args.latency_targets), _floats(args.accuracy_targets), jobs=args.jobs)
    _emit(sim.sweep_csv(cells, cfg.n_users), args.out)
    return EXIT_OK if all(c.ok for c in cells) else EXIT_ERROR


def cmd_verify_bound(args):
    cfg = _config(args)
    table = sim.build_table(cfg)
    trace = sim.run_simulation(cfg, table)
    bad = sim.verify_trace(trace, cfg, table)
    print(json.dumps({"slots": len(trace), "violations": len(bad), "first": bad[:10]}))
    return EXIT_OK if not bad else EXIT_ERROR


def cmd_histogram(args):
    cfg = _config(args)
    if args.trace:
        hist = sim.histogram_from_rows(sim.parse_trace_csv(Path(args.trace).read_text()), cfg.N_set, cfg.Q_set)
    else:
        hist = sim.decision_histogram(sim.run_simulation(cfg), cfg.N_set, cfg.Q_set)
    _emit(_rows_csv(["user", "axis", "value", "frequency"], sim.histogram_rows(hist)), args.out)
    return EXIT_OK


def cmd_tune(args):
    cfg = _config(args)
    res = sim.grid_search(cfg, _floats(args.V), _floats(args.eps_z), _floats(args.eps_q))
    _emit(json.dumps(res, indent=2) + "\n", args.out)
    return EXIT_OK if res and res[0]["ok"] else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semeq")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="scenario JSON; defaults to the built-in scenario")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.set_defaults(fn=fn)
        return p

    add("gen-world", cmd_gen_world, "write synthetic EMB1 latents and labels to a directory")
    p = add("anchors", cmd_anchors, "select anchors from an EMB1 file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--M", type=int, default=4)
    p.add_argument("--strategy", choices=["prototypical", "uniform"], default="prototypical")
    p = add("equalize-eval", cmd_equalize_eval, "accuracy versus N and q for each equalizer")
    p.add_argument("--methods", default="PFE,FE,UPE")
    p.add_argument("--strategy", choices=["prototypical", "uniform"], default="prototypical")
    p.add_argument("--N", help="comma-separated N values")
    p.add_argument("--q", help="comma-separated bit widths")
    add("accuracy-table", cmd_accuracy_table, "per-user accuracy over the N x q grid")
    for name, fn, help in [
        ("simulate", cmd_simulate, "run the allocator and write the trace CSV"),
        ("verify-bound", cmd_verify_bound, "check the per-slot drift bound on a fresh run"),
        ("histogram", cmd_histogram, "frequency of selected N and q per user"),
    ]:
        p = add(name, fn, help)
        p.add_argument("--slots", type=int)
        p.add_argument("--table", help="precomputed accuracy table CSV")
    sub.choices["histogram"].add_argument("--trace", help="read decisions from an existing trace CSV")
    p = add("sweep", cmd_sweep, "power and bit-load over latency/accuracy targets")
    p.add_argument("--latency-targets", default="0.02,0.04,0.08")
    p.add_argument("--accuracy-targets", default="0.7")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--slots", type=int)
    p.add_argument("--table")
    p = add("tune", cmd_tune, "coarse grid search over V, eps_z, eps_q")
    p.add_argument("--V", default="1e-4,1e-3,1e-2")
    p.add_argument("--eps-z", default="0.1,1")
    p.add_argument("--eps-q", default="1")
    p.add_argument("--slots", type=int)
    p.add_argument("--table")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except Exception as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
