"""Long training runs; deselected by default, run with ``pytest -m slow``."""

from pathlib import Path

import numpy as np
import pytest

from slotshare import scenarios
from slotshare.core import run_experiment

FIXTURE = Path(__file__).parent / "fixtures" / "synthetic_trace.csv"
SEEDS = (0, 1, 2)

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def fixed_5_2_runs():
    return [run_experiment(scenarios.fixed_5_2.with_overrides(seed=seed)) for seed in SEEDS]


def test_fixed_5_2_near_capacity_and_fair(fixed_5_2_runs):
    sums = [summary.sum_throughput for _, summary in fixed_5_2_runs]
    deltas = [summary.mean_delta[20] for _, summary in fixed_5_2_runs]
    assert np.mean(sums) >= 1.70
    assert np.mean(deltas) <= 0.10


def test_fixed_5_2_loss_shrinks_with_window(fixed_5_2_runs):
    means = {w: np.mean([s.mean_delta[w] for _, s in fixed_5_2_runs]) for w in (5, 10, 20)}
    assert means[5] >= means[10] >= means[20]


def test_fixed_5_2_collisions_suppressed(fixed_5_2_runs):
    for _, summary in fixed_5_2_runs:
        assert summary.late_collision_rate <= 0.05


def test_fixed_10_2_near_capacity_and_fair():
    runs = [run_experiment(scenarios.fixed_10_2.with_overrides(seed=seed)) for seed in SEEDS]
    assert np.mean([s.sum_throughput for _, s in runs]) >= 1.70
    assert np.mean([s.mean_delta[20] for _, s in runs]) <= 0.10


def test_rate_trace_beats_random_access():
    base = scenarios.rate_trace_5.with_overrides(trace_path=str(FIXTURE))
    for seed in SEEDS:
        learned_log, learned = run_experiment(base.with_overrides(seed=seed))
        _, aloha = run_experiment(base.with_overrides(seed=seed, baseline="aloha"))
        assert np.isfinite(learned_log.slots["gamma"]).all()
        assert learned.sum_throughput > aloha.sum_throughput
