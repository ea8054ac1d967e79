"""Time-slot simulation of the dynamic resource allocator, target sweeps,
decision histograms and trace persistence.

Seeds: a scenario's base seed expands into independent streams with
``numpy.random.SeedSequence([seed, stream, len(cell), *cell])`` where
``stream`` is 0 for the channel, 1 for the latent world and 2 for anchor
draws. Sweep cell ``(i, j)`` runs its channel on ``[seed, 0, 2, i, j]``;
world and anchors are shared by every cell.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .allocator import AllocatorParams, greedy_select
from .lyapunov import QueueState, SlotRecord, update_queues, verify_appendix_bound, xi_constant
from .phy import ComputeConfig, RadioConfig, ServerCompute, UserCompute, sample_channel, slot_costs
from .world import (
    AccuracyTable,
    build_accuracy_table,
    generate_shared_worlds,
    ingest_embeddings,
    train_centroid_decoder,
)

log = logging.getLogger(__name__)

CHANNEL, WORLD, ANCHORS = 0, 1, 2


def derive_seed(seed: int, stream: int, *cell: int) -> int:
    # the cell count is part of the key: SeedSequence zero-pads short entropy,
    # so [s, 0] and [s, 0, 0, 0] would otherwise collide
    return int(np.random.SeedSequence([seed, stream, len(cell), *cell]).generate_state(1)[0])


@dataclass
class WorldConfig:
    user_dims: list[int] = field(default_factory=lambda: [384, 256, 256])
    rx_dim: int = 256
    n_classes: int = 100
    n_samples: int = 6000
    cluster_spread: float = 3.0
    user_noise: list[float] = field(default_factory=lambda: [0.3, 0.4, 0.5])
    method: str = "PFE"
    anchors: str = "prototypical"
    M: int = 4
    # optional per-user EMB1 triples {"tx", "rx", "labels"}; replaces the synthetic world
    external: list[dict] | None = None
    # optional precomputed accuracy table CSV; skips world generation entirely
    table_csv: str | None = None


def _default_users():
    # encoder cost ratios loosely follow a CLIP-B/32, ViT-B/16, ViT-S/16 trio
    return [
        UserCompute(kappa=1e-28, f_min=3e8, f_max=3.5e9, c0=1.0e7, c1=2e4),
        UserCompute(kappa=1e-28, f_min=3e8, f_max=3.5e9, c0=3.0e7, c1=2e4),
        UserCompute(kappa=1e-28, f_min=3e8, f_max=3.5e9, c0=1.0e7, c1=2e4),
    ]


@dataclass
class ScenarioConfig:
    N_set: list[int] = field(default_factory=lambda: [32, 64, 96, 128, 192, 384, 512])
    Q_set: list[int] = field(default_factory=lambda: [2, 4, 6, 8, 12, 16, 32])
    L_bar: float = 0.04
    G_bar: list[float] = field(default_factory=lambda: [0.7, 0.7, 0.7])
    V: float = 1e-3
    eps_z: float = 0.1
    eps_q: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    b_min: float | None = None
    T_slots: int = 7500
    seed: int = 0
    radio: RadioConfig = field(default_factory=RadioConfig)
    compute: ComputeConfig = field(default_factory=lambda: ComputeConfig(_default_users(), ServerCompute(
        kappa=1e-28, f_min=3e8, f_max=4e9, r0=5e5, r1=1e4, pred=1e6)))
    world: WorldConfig = field(default_factory=WorldConfig)

    @property
    def n_users(self) -> int:
        return len(self.G_bar)

    def __post_init__(self):
        if not self.N_set or not self.Q_set:
            raise ValueError("N_set and Q_set must be non-empty")
        self.N_set = sorted(int(n) for n in self.N_set)
        self.Q_set = sorted(int(q) for q in self.Q_set)
        if self.T_slots < 1:
            raise ValueError("T_slots must be >= 1")
        if len(self.compute.users) != self.n_users:
            raise ValueError(f"{len(self.compute.users)} user compute configs for {self.n_users} users")

    def params(self) -> AllocatorParams:
        return AllocatorParams(self.V, self.alpha, self.beta, self.b_min)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        if "radio" in d:
            d["radio"] = RadioConfig(**d["radio"])
        if "compute" in d:
            c = d["compute"]
            d["compute"] = ComputeConfig([UserCompute(**u) for u in c["users"]], ServerCompute(**c["server"]))
        if "world" in d:
            d["world"] = WorldConfig(**d["world"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path) -> ScenarioConfig:
    return ScenarioConfig.from_dict(json.loads(Path(path).read_text()))


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2))


def build_worlds(cfg: ScenarioConfig):
    w = cfg.world
    if w.external:
        worlds = [ingest_embeddings(e["tx"], e["rx"], e["labels"], seed=derive_seed(cfg.seed, WORLD)) for e in w.external]
    else:
        worlds = generate_shared_worlds(
            w.user_dims, w.rx_dim, w.n_classes, w.n_samples, w.cluster_spread, w.user_noise,
            seed=derive_seed(cfg.seed, WORLD),
        )
    if len(worlds) != cfg.n_users:
        raise ValueError(f"{len(worlds)} worlds for {cfg.n_users} users")
    return worlds


def build_table(cfg: ScenarioConfig) -> AccuracyTable:
    w = cfg.world
    if w.table_csv:
        table = AccuracyTable.from_csv(w.table_csv, w.method)
    else:
        worlds = build_worlds(cfg)
        decoder = train_centroid_decoder(worlds[0])
        table = build_accuracy_table(
            worlds, decoder, w.method, cfg.N_set, cfg.Q_set, w.anchors, w.M, derive_seed(cfg.seed, ANCHORS)
        )
    missing = set(cfg.N_set) - set(table.N_set) or set(cfg.Q_set) - set(table.Q_set)
    if missing or table.n_users != cfg.n_users:
        raise ValueError("accuracy table does not cover the scenario's users and N x q grid")
    return table


def worst_latency(cfg: ScenarioConfig) -> float:
    """Largest latency any feasible decision can produce (minimum clocks and rates)."""
    n, b = max(cfg.N_set), max(cfg.Q_set)
    users = max(u.cycles(n) / u.f_min + n * b / cfg.radio.r_min for u in cfg.compute.users)
    srv = cfg.compute.server
    return users + cfg.n_users * srv.cycles(n) / srv.f_min


def bound_constant(cfg: ScenarioConfig, table: AccuracyTable) -> float:
    g_min = [float(table.grid[k].min()) for k in range(cfg.n_users)]
    return xi_constant(cfg.eps_z, cfg.eps_q, worst_latency(cfg), cfg.L_bar, cfg.G_bar, 1.0, L_min=0.0, G_min=g_min)


# ---------------------------------------------------------------------------
# simulation


@dataclass
class Trace:
    records: list[SlotRecord]
    n_users: int
    L_bar: float
    G_bar: tuple
    structurally_infeasible: bool = False

    def __len__(self):
        return len(self.records)

    def series(self, name: str) -> np.ndarray:
        if name == "L":
            return np.array([r.costs.L for r in self.records])
        if name == "p":
            return np.array([r.costs.p for r in self.records])
        if name == "G":
            return np.array([r.G for r in self.records])
        if name == "Z":
            return np.array([r.after.Z for r in self.records])
        raise KeyError(name)

    def running_mean(self, name: str) -> np.ndarray:
        x = self.series(name)
        return np.cumsum(x, axis=0) / np.arange(1, len(x) + 1).reshape((-1,) + (1,) * (x.ndim - 1))

    def summary(self, window: int = 1000) -> dict:
        T = len(self.records)
        L = self.series("L")
        G = self.series("G")
        p = self.series("p")
        last = self.records[-1].after
        mean_G = G.mean(axis=0)
        return {
            "T": T,
            "mean_L": float(L.mean()),
            "mean_G": [float(g) for g in mean_G],
            "mean_p": float(p.mean()),
            "mean_p_last": float(p[-window:].mean()),
            "Z_final": last.Z,
            "Q_final": list(last.Q),
            "Z_over_T": last.Z / T,
            "Q_over_T": [q / T for q in last.Q],
            "latency_met": bool(L.mean() <= 1.02 * self.L_bar),
            "accuracy_met": bool(all(g >= 0.98 * gb for g, gb in zip(mean_G, self.G_bar))),
            "structurally_infeasible": self.structurally_infeasible,
        }

    @property
    def constraint_infeasible(self) -> bool:
        s = self.summary()
        return s["structurally_infeasible"] or not (s["latency_met"] and s["accuracy_met"])


def _structurally_infeasible(cfg: ScenarioConfig, table: AccuracyTable) -> bool:
    if any(gb > table.grid[k].max() for k, gb in enumerate(cfg.G_bar)):
        return True
    n = min(cfg.N_set)
    srv = cfg.compute.server
    best = max(u.cycles(n) / u.f_max for u in cfg.compute.users) + cfg.n_users * srv.cycles(n) / srv.f_max
    return best > cfg.L_bar


def realize(state, decision, h2, table, cfg: ScenarioConfig):
    costs = slot_costs(decision.N, decision.q, decision.f_c, decision.B, decision.R, decision.f_r, h2,
                       cfg.radio, cfg.compute)
    G = tuple(table.lookup(k, n, b) for k, (n, b) in enumerate(zip(decision.N, decision.q)))
    return costs, G


def run_simulation(cfg: ScenarioConfig, table: AccuracyTable | None = None, channel_seed: int | None = None) -> Trace:
    """Run the allocator for ``cfg.T_slots`` slots.

    Each slot observes fresh channel gains, picks (N, q) greedily with the
    continuous resources in closed form, then realizes latency, accuracy and
    power. The queues entering slot t were updated with slot t-1's metrics.
    """
    table = build_table(cfg) if table is None else table
    rng = np.random.default_rng(derive_seed(cfg.seed, CHANNEL) if channel_seed is None else channel_seed)
    params = cfg.params()
    state = QueueState.initial(cfg.n_users, cfg.eps_z, cfg.eps_q, cfg.L_bar, cfg.G_bar)
    prev = None
    records = []
    for t in range(cfg.T_slots):
        h2 = tuple(sample_channel(cfg.radio, cfg.n_users, rng))
        decision, gamma = greedy_select(state, h2, table, cfg.N_set, cfg.Q_set, params, cfg.radio, cfg.compute, prev)
        costs, G = realize(state, decision, h2, table, cfg)
        after = update_queues(state, costs.L, G)
        records.append(SlotRecord(t, h2, decision, costs, G, state, after, gamma))
        state, prev = after, (decision.N, decision.q)
    return Trace(records, cfg.n_users, cfg.L_bar, tuple(cfg.G_bar), _structurally_infeasible(cfg, table))


def verify_trace(trace: Trace, cfg: ScenarioConfig, table: AccuracyTable) -> list[int]:
    """Slot indices whose realized drift violates the per-slot bound."""
    xi = bound_constant(cfg, table)
    return [r.t for r in trace.records if not verify_appendix_bound(r, cfg.V, xi)]


# ---------------------------------------------------------------------------
# trace CSV


def trace_columns(K: int) -> list[str]:
    per = lambda name: [f"{name}_{k + 1}" for k in range(K)]
    return (
        ["t", "Z"] + per("Q") + ["L", "L_r"] + per("L_tx") + per("G") + ["p_total", "p_r"]
        + per("p_u") + per("p_c") + per("N") + per("q") + per("f") + per("B") + per("R") + per("h2") + ["gamma"]
    )


def trace_rows(trace: Trace) -> list[dict]:
    rows = []
    for r in trace.records:
        d, c = r.decision, r.costs
        row = {"t": r.t, "Z": r.before.Z, "L": c.L, "L_r": c.L_r, "p_total": c.p, "p_r": c.p_r, "gamma": r.gamma}
        for k in range(trace.n_users):
            i = k + 1
            row.update({
                f"Q_{i}": r.before.Q[k], f"L_tx_{i}": c.L_tx[k], f"G_{i}": r.G[k], f"p_u_{i}": c.p_u[k],
                f"p_c_{i}": c.p_c[k], f"N_{i}": d.N[k], f"q_{i}": d.q[k], f"f_{i}": d.f_c[k], f"B_{i}": d.B[k],
                f"R_{i}": d.R[k], f"h2_{i}": r.h2[k],
            })
        rows.append(row)
    return rows


def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def emit_trace_csv(trace: Trace) -> str:
    cols = trace_columns(trace.n_users)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in trace_rows(trace):
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def parse_trace_csv(text: str) -> list[dict]:
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        rows.append({k: (int(v) if k == "t" or k.startswith(("N_", "q_")) else float(v)) for k, v in raw.items()})
    return rows


def write_trace(trace: Trace, path) -> None:
    Path(path).write_text(emit_trace_csv(trace))


# ---------------------------------------------------------------------------
# histograms and sweeps


def decision_histogram(trace: Trace, N_set: Sequence[int], Q_set: Sequence[int]) -> list[dict]:
    """Per user, the empirical frequency of each N and each q."""
    if not trace.records:
        raise ValueError("empty trace")
    T = len(trace.records)
    out = []
    for k in range(trace.n_users):
        Ns = [r.decision.N[k] for r in trace.records]
        qs = [r.decision.q[k] for r in trace.records]
        out.append({
            "N": {n: Ns.count(n) / T for n in N_set},
            "q": {b: qs.count(b) / T for b in Q_set},
            "mean_bitload": float(np.mean([n * b for n, b in zip(Ns, qs)])),
        })
    return out


def histogram_from_rows(rows: list[dict], N_set, Q_set) -> list[dict]:
    """Same as ``decision_histogram`` but from parsed trace CSV rows."""
    if not rows:
        raise ValueError("empty trace")
    K = sum(1 for c in rows[0] if c.startswith("N_"))
    T = len(rows)
    out = []
    for k in range(1, K + 1):
        Ns = [r[f"N_{k}"] for r in rows]
        qs = [r[f"q_{k}"] for r in rows]
        out.append({
            "N": {n: Ns.count(n) / T for n in N_set},
            "q": {b: qs.count(b) / T for b in Q_set},
            "mean_bitload": float(np.mean([n * b for n, b in zip(Ns, qs)])),
        })
    return out


def histogram_rows(hist: list[dict]) -> list[tuple]:
    rows = []
    for k, h in enumerate(hist):
        rows += [(k + 1, "N", v, f) for v, f in h["N"].items()]
        rows += [(k + 1, "q", v, f) for v, f in h["q"].items()]
    return rows


@dataclass
class SweepCell:
    L_bar: float
    G_bar: float
    i: int
    j: int
    mean_p_last: float = math.nan
    mean_L: float = math.nan
    mean_G: list = field(default_factory=list)
    bitload: list = field(default_factory=list)
    ok: bool = True
    error: str = ""


def _run_cell(args):
    cfg, table, cell, window = args
    try:
        c = replace(cfg, L_bar=cell.L_bar, G_bar=[cell.G_bar] * cfg.n_users)
        trace = run_simulation(c, table, channel_seed=derive_seed(cfg.seed, CHANNEL, cell.i, cell.j))
        s = trace.summary(window)
        hist = decision_histogram(trace, cfg.N_set, cfg.Q_set)
        return replace(cell, mean_p_last=s["mean_p_last"], mean_L=s["mean_L"], mean_G=s["mean_G"],
                       bitload=[h["mean_bitload"] for h in hist])
    except Exception as exc:  # a failed cell is reported, not fatal
        log.error("sweep cell L=%g G=%g failed: %s", cell.L_bar, cell.G_bar, exc)
        return replace(cell, ok=False, error=str(exc))


def sweep(cfg: ScenarioConfig, latency_targets, accuracy_targets, table=None, window: int = 1000, jobs: int = 1):
    """One simulation per (L_bar, G_bar) pair; every user gets the same accuracy target."""
    if not latency_targets or not accuracy_targets:
        raise ValueError("sweep grids must be non-empty")
    table = build_table(cfg) if table is None else table
    cells = [SweepCell(lb, gb, i, j) for i, lb in enumerate(latency_targets) for j, gb in enumerate(accuracy_targets)]
    work = [(cfg, table, c, window) for c in cells]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_run_cell, work))
    return [_run_cell(w) for w in work]


def sweep_csv(cells: Sequence[SweepCell], n_users: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L_bar", "G_bar", "mean_power_last", "mean_L"] + [f"mean_G_{k + 1}" for k in range(n_users)]
               + [f"bitload_{k + 1}" for k in range(n_users)] + ["status"])
    for c in sorted(cells, key=lambda c: (c.L_bar, c.G_bar)):
        if c.ok:
            w.writerow([repr(c.L_bar), repr(c.G_bar), repr(c.mean_p_last), repr(c.mean_L)]
                       + [repr(g) for g in c.mean_G] + [repr(b) for b in c.bitload] + ["ok"])
        else:
            w.writerow([repr(c.L_bar), repr(c.G_bar)] + [""] * (2 + 2 * n_users) + [f"failed: {c.error}"])
    return buf.getvalue()


def grid_search(cfg: ScenarioConfig, V_grid, eps_z_grid, eps_q_grid, table=None, window: int = 1000):
    """Coarse search over control parameters.

    Returns all tried points sorted so that runs meeting both constraints and
    the queue-stability check come first, ordered by final-window power.
    """
    table = build_table(cfg) if table is None else table
    results = []
    for V in V_grid:
        for ez in eps_z_grid:
            for eq in eps_q_grid:
                c = replace(cfg, V=V, eps_z=ez, eps_q=eq)
                s = run_simulation(c, table).summary(window)
                stable = s["Z_over_T"] <= 1e-3 * c.L_bar and max(s["Q_over_T"]) <= 1e-3
                ok = s["latency_met"] and s["accuracy_met"] and stable
                results.append({"V": V, "eps_z": ez, "eps_q": eq, "ok": ok, "mean_p_last": s["mean_p_last"],
                                "mean_L": s["mean_L"], "Z_over_T": s["Z_over_T"]})
    return sorted(results, key=lambda r: (not r["ok"], r["mean_p_last"]))

