import json
from dataclasses import replace

import numpy as np
import pytest

from semeq import sim
from semeq.phy import ComputeConfig, ServerCompute, UserCompute
from semeq.sim import (
    CHANNEL,
    ScenarioConfig,
    decision_histogram,
    derive_seed,
    emit_trace_csv,
    histogram_from_rows,
    parse_trace_csv,
    run_simulation,
    sweep,
    sweep_csv,
    trace_rows,
    verify_trace,
)

from helpers import analytic_table


def test_single_slot_single_user():
    table = analytic_table(1)
    cfg = ScenarioConfig(N_set=table.N_set, Q_set=table.Q_set, G_bar=[0.7], T_slots=1,
                         compute=ComputeConfig([UserCompute()], ServerCompute()))
    tr = run_simulation(cfg, table)
    assert len(tr) == 1
    r = tr.records[0]
    assert r.before.Z == 0 and r.before.Q == (0.0,)
    assert r.after.Z == pytest.approx(max(0.0, cfg.eps_z * (r.costs.L - cfg.L_bar)))
    assert np.isfinite(r.gamma)
    hist = decision_histogram(tr, cfg.N_set, cfg.Q_set)
    assert sorted(hist[0]["N"].values()) == [0, 0, 0, 1.0]


def test_queue_chain_and_length(small_cfg):
    cfg, table = small_cfg
    tr = run_simulation(cfg, table)
    assert len(tr) == cfg.T_slots
    for a, b in zip(tr.records, tr.records[1:]):
        assert a.after == b.before
    rm = tr.running_mean("p")
    assert rm[-1] == pytest.approx(np.mean([r.costs.p for r in tr.records]))
    assert tr.running_mean("G").shape == (cfg.T_slots, 3)


def test_same_seed_same_bytes(small_cfg):
    cfg, table = small_cfg
    a = emit_trace_csv(run_simulation(cfg, table))
    assert a == emit_trace_csv(run_simulation(cfg, table))
    assert a != emit_trace_csv(run_simulation(replace(cfg, seed=1), table))


def test_trace_csv_round_trip(small_cfg):
    cfg, table = small_cfg
    tr = run_simulation(cfg, table)
    text = emit_trace_csv(tr)
    header = text.splitlines()[0].split(",")
    assert header == sim.trace_columns(3)
    assert header[:4] == ["t", "Z", "Q_1", "Q_2"]
    rows = parse_trace_csv(text)
    assert rows == trace_rows(tr)
    assert histogram_from_rows(rows, cfg.N_set, cfg.Q_set) == decision_histogram(tr, cfg.N_set, cfg.Q_set)


def test_histogram_frequencies_sum_to_one(small_cfg):
    cfg, table = small_cfg
    for h in decision_histogram(run_simulation(cfg, table), cfg.N_set, cfg.Q_set):
        assert abs(sum(h["N"].values()) - 1) <= 1e-12
        assert abs(sum(h["q"].values()) - 1) <= 1e-12
    with pytest.raises(ValueError):
        decision_histogram(sim.Trace([], 1, 0.04, (0.7,)), cfg.N_set, cfg.Q_set)


def test_bound_holds_on_small_run(small_cfg):
    cfg, table = small_cfg
    tr = run_simulation(replace(cfg, T_slots=300), table)
    assert verify_trace(tr, cfg, table) == []


def test_infeasible_targets_are_flagged(small_cfg):
    cfg, table = small_cfg
    tr = run_simulation(replace(cfg, G_bar=[0.99] * 3), table)
    assert tr.summary()["structurally_infeasible"] and tr.constraint_infeasible


def test_sweep_single_cell_matches_run(small_cfg):
    cfg, table = small_cfg
    (cell,) = sweep(cfg, [0.04], [0.7], table)
    c = replace(cfg, G_bar=[0.7] * 3)
    s = run_simulation(c, table, channel_seed=derive_seed(cfg.seed, CHANNEL, 0, 0)).summary()
    assert cell.ok and cell.mean_p_last == s["mean_p_last"] and cell.mean_L == s["mean_L"]


def test_sweep_is_order_independent(small_cfg):
    cfg, table = small_cfg
    cfg = replace(cfg, T_slots=20)
    a = sweep_csv(sweep(cfg, [0.03, 0.06], [0.6, 0.7], table), 3)
    b = sweep_csv(sweep(cfg, [0.03, 0.06], [0.6, 0.7], table, jobs=2), 3)
    assert a == b
    assert len(a.splitlines()) == 5


def test_sweep_marks_failed_cells(small_cfg, monkeypatch):
    cfg, table = small_cfg
    real = sim.run_simulation

    def flaky(c, t, channel_seed=None):
        if c.L_bar > 0.05:
            raise RuntimeError("boom")
        return real(c, t, channel_seed)

    monkeypatch.setattr(sim, "run_simulation", flaky)
    cells = sweep(replace(cfg, T_slots=5), [0.04, 0.06], [0.7], table)
    assert [c.ok for c in cells] == [True, False]
    assert "failed: boom" in sweep_csv(cells, 3)
    with pytest.raises(ValueError):
        sweep(cfg, [], [0.7], table)


def test_config_json_round_trip(tmp_path):
    cfg = ScenarioConfig(N_set=[512, 32], V=0.01)
    assert cfg.N_set == [32, 512]
    sim.save_config(cfg, tmp_path / "c.json")
    back = sim.load_config(tmp_path / "c.json")
    assert back == cfg
    d = json.loads((tmp_path / "c.json").read_text())
    d["bogus"] = 1
    with pytest.raises(ValueError, match="bogus"):
        ScenarioConfig.from_dict(d)
    with pytest.raises(ValueError):
        ScenarioConfig(T_slots=0)
    with pytest.raises(ValueError):
        ScenarioConfig(G_bar=[0.7])


def test_seed_streams_are_distinct():
    seeds = {derive_seed(0, s, *c) for s in range(3) for c in [(), (0, 0), (0, 1), (1, 0)]}
    assert len(seeds) == 12
    assert derive_seed(5, 1) == derive_seed(5, 1)


def test_grid_search_ranks_feasible_first(small_cfg):
    cfg, table = small_cfg
    res = sim.grid_search(replace(cfg, T_slots=30), [1e-3, 1e-1], [0.1], [1.0], table)
    assert len(res) == 2
    oks = [r["ok"] for r in res]
    assert oks == sorted(oks, reverse=True)
