from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from slotshare.config import ExperimentConfig
from slotshare.core import Simulation, run_experiment
from slotshare.io import emit_metrics, load_metrics
from slotshare.report import RunSummary

FIXTURE = Path(__file__).parent / "fixtures" / "synthetic_trace.csv"

SMALL_NET = dict(lstm_hidden=8, value_hidden=4, minibatch=8, buffer_capacity=200)


def _config(**overrides):
    values = dict(scenario="fixed", n_users=3, n_rbs=2, k_max=3, horizon=300, windows=[5, 10, 20], **SMALL_NET)
    values.update(overrides)
    return ExperimentConfig(**values)


def _check_tables(log, population, n_rbs):
    expected_rows = sum(len(population.active_ids(t)) for t in range(1, population.horizon + 1))
    assert len(log.slots) == expected_rows
    assert not log.slots.duplicated(["t", "user_id"]).any()
    per_slot = log.slots.groupby("t")["gamma"].sum()
    assert (per_slot <= n_rbs).all()
    choices = log.slots[log.slots["choice"] > 0]
    assert ((choices["collided"] == 1) | (choices["gamma"] > 0)).all()
    assert (log.slots.loc[log.slots["choice"] == 0, "collided"] == 0).all()


def test_single_user_learns_to_transmit():
    cfg = ExperimentConfig(
        scenario="fixed",
        n_users=1,
        n_rbs=1,
        k_max=1,
        horizon=2000,
        windows=[5],
        slot_window=5,
        lstm_hidden=8,
        value_hidden=4,
        tau=0.5,
        minibatch=16,
        train_every=1,
        sync_every=10,
        epsilon_decay=0.99,
        seed=1,
    )
    log, summary = run_experiment(cfg)
    late = log.slots[log.slots["t"] > 1500]
    assert late["gamma"].mean() >= 0.9
    assert log.users["long_term_target"].iloc[0] == 1.0
    assert summary.collision_rate == 0.0


def test_fixed_run_tables_and_tiling():
    cfg = _config(seed=3)
    sim = Simulation(cfg)
    log, summary = sim.run()
    _check_tables(log, sim.population, cfg.n_rbs)
    assert list(log.slots.columns) == ["t", "user_id", "choice", "gamma", "Gamma", "Gamma_target", "collided"]
    assert list(log.users.columns) == [
        "user_id",
        "t_arr",
        "t_dep",
        "long_term_throughput",
        "long_term_target",
        "delta_Tw5",
        "delta_Tw10",
        "delta_Tw20",
    ]
    decisions = log.decisions
    assert decisions["T"].iloc[0] == 1
    assert (decisions["T"].diff().dropna().to_numpy() == decisions["K"].to_numpy()[:-1]).all()
    assert (decisions["K"] == 3).all()
    assert (log.users["t_dep"] == 300).all()
    assert log.users["long_term_target"].to_numpy() == pytest.approx(np.full(3, 2 / 3))
    assert np.isfinite(summary.sum_throughput)
    assert 0.0 <= summary.sum_throughput <= 2.0
    assert summary.seed == 3


def test_dynamic_run_skips_idle_slots_and_waits_for_decisions():
    cfg = _config(scenario="dynamic", arrival_rate=0.02, t_min=20, t_max=40, horizon=1500, seed=5)
    sim = Simulation(cfg)
    log, summary = sim.run()
    _check_tables(log, sim.population, cfg.n_rbs)

    decisions = log.decisions
    starts = decisions["T"].to_numpy()
    ends = starts + decisions["K"].to_numpy()
    for end, nxt in zip(ends[:-1], starts[1:]):
        assert nxt >= end
        for t in range(end, nxt):
            assert len(sim.population.active_ids(t)) == 0
    assert summary.busy_slots == log.slots["t"].nunique()

    boundaries = set(starts.tolist())
    for user_id, rows in log.slots.groupby("user_id"):
        first_decision = rows.loc[rows["t"].isin(boundaries), "t"].min()
        before = rows[rows["t"] < first_decision]
        assert (before["choice"] == 0).all()
    assert summary.n_users == len(log.users)
    assert np.isfinite(summary.weighted_objective)


def test_sequential_runs_are_identical(tmp_path: Path):
    cfg = _config(seed=11)
    paths = []
    for name in ("a", "b"):
        log, _ = run_experiment(cfg)
        paths.append(emit_metrics(log, tmp_path / name))
    for table in ("slots", "users", "summary", "decisions"):
        assert paths[0][table].read_bytes() == paths[1][table].read_bytes()


def test_threaded_agents_match_sequential():
    sequential, _ = run_experiment(_config(seed=12))
    threaded, _ = run_experiment(_config(seed=12, workers=3))
    pd.testing.assert_frame_equal(sequential.slots, threaded.slots)
    pd.testing.assert_frame_equal(sequential.users, threaded.users)


def test_emitted_metrics_reload(tmp_path: Path):
    log, summary = run_experiment(_config(seed=2, horizon=120))
    emit_metrics(log, tmp_path)
    reloaded = load_metrics(tmp_path)
    for table in ("slots", "users", "summary", "decisions"):
        pd.testing.assert_frame_equal(getattr(log, table), getattr(reloaded, table), check_dtype=False)
    summary.to_json(tmp_path / "summary.json")
    assert RunSummary.from_json(tmp_path / "summary.json") == summary


@pytest.mark.parametrize("baseline", ["max_rate", "pf"])
def test_centralized_baselines_fill_every_rb(baseline: str):
    cfg = _config(n_users=5, baseline=baseline, horizon=200)
    log, summary = run_experiment(cfg)
    assert summary.sum_throughput == pytest.approx(2.0)
    assert summary.collision_rate == 0.0
    assert not log.decisions.empty


def test_pf_baseline_shares_fairly():
    log, _ = run_experiment(_config(n_users=4, baseline="pf", horizon=400))
    throughput = log.users["long_term_throughput"].to_numpy()
    assert throughput.max() - throughput.min() <= 0.05


def test_aloha_baseline_collides():
    log, summary = run_experiment(_config(n_users=5, baseline="aloha", horizon=400, seed=4))
    assert summary.collision_rate > 0.0
    assert summary.transmissions > 0
    assert (log.slots.groupby("t")["gamma"].sum() <= 2).all()


def test_rate_mode_trace_run():
    cfg = _config(scenario="rate", trace_path=str(FIXTURE), n_rbs=5, k_max=5, horizon=300, seed=6)
    sim = Simulation(cfg)
    log, summary = sim.run()
    assert len(log.slots) == sum(len(sim.population.active_ids(t)) for t in range(1, 301))
    assert np.isfinite(log.slots["gamma"]).all()
    assert (log.slots["gamma"] >= 0).all()
    assert (log.slots["Gamma_target"] > 0).all()
    assert np.isfinite(summary.sum_throughput)


def test_rate_mode_without_trace_places_users():
    cfg = _config(scenario="rate", arrival_rate=0.05, t_min=10, t_max=20, horizon=200, seed=8, baseline="max_rate")
    sim = Simulation(cfg)
    log, summary = sim.run()
    assert all(r.trajectory is not None for r in sim.population.records)
    assert summary.collision_rate == 0.0
    assert np.isfinite(log.slots["gamma"]).all()


def test_weights_saved_and_reused(tmp_path: Path):
    cfg = _config(seed=9, horizon=60, save_weights=True, out_dir=str(tmp_path))
    run_experiment(cfg)
    weights = sorted((tmp_path / "weights").glob("user_*.npz"))
    assert [p.name for p in weights] == ["user_1.npz", "user_2.npz", "user_3.npz"]
    warm = _config(seed=9, horizon=30, warm_start=str(weights[0]))
    log, _ = run_experiment(warm)
    assert len(log.slots) == 90


def test_saved_weights_cover_users_alive_at_horizon(tmp_path: Path):
    cfg = _config(
        scenario="dynamic", arrival_rate=0.1, t_min=5, t_max=40, horizon=200, seed=12,
        save_weights=True, out_dir=str(tmp_path),
    )
    sim = Simulation(cfg)
    sim.run()
    alive = {int(u) for u in sim.population.active_ids(cfg.horizon)}
    saved = {int(p.stem.split("_")[1]) for p in (tmp_path / "weights").glob("user_*.npz")}
    assert saved == alive


def test_rate_mode_state_carries_normalized_rates():
    cfg = _config(scenario="rate", trace_path=str(FIXTURE), n_rbs=3, k_max=3, horizon=150, seed=13)
    sim = Simulation(cfg)
    sim.run()
    observed = [a.observation for a in sim.agents.values() if len(a.observation.prev_action)]
    assert observed
    for obs in observed:
        assert obs.prev_rates is not None and obs.prev_rates.shape == (3,)
        assert obs.prev_rates.max() == 1.0
