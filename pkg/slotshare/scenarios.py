"""Built-in experiment presets."""

from __future__ import annotations

from typing import Dict

from .config import ExperimentConfig

fixed_5_2 = ExperimentConfig(scenario="fixed", n_users=5, n_rbs=2, k_max=5, horizon=50_000)

fixed_10_2 = ExperimentConfig(scenario="fixed", n_users=10, n_rbs=2, k_max=10, horizon=50_000)

fixed_10_4 = ExperimentConfig(scenario="fixed", n_users=10, n_rbs=4, k_max=10, horizon=50_000)

dynamic_2 = ExperimentConfig(
    scenario="dynamic", arrival_rate=0.02, t_min=100, t_max=200, n_rbs=2, k_max=5, horizon=100_000
)

dynamic_4 = ExperimentConfig(
    scenario="dynamic", arrival_rate=0.02, t_min=100, t_max=200, n_rbs=4, k_max=5, horizon=100_000
)

rate_trace_5 = ExperimentConfig(
    scenario="rate",
    trace_path="tests/fixtures/synthetic_trace.csv",
    n_rbs=5,
    k_max=5,
    horizon=2_000,
)

DESCRIPTIONS: Dict[str, str] = {
    "fixed_5_2": "Five permanent users sharing two RBs.",
    "fixed_10_2": "Ten permanent users sharing two RBs.",
    "fixed_10_4": "Ten permanent users sharing four RBs.",
    "dynamic_2": "Poisson arrivals (0.02/slot, 100-200 slot lifetimes) on two RBs.",
    "dynamic_4": "Poisson arrivals (0.02/slot, 100-200 slot lifetimes) on four RBs.",
    "rate_trace_5": "Vehicular trace with Rayleigh fading and Shannon rates on five RBs.",
}


def get(name: str) -> ExperimentConfig:
    if name not in DESCRIPTIONS:
        raise KeyError(f"Unknown scenario preset {name!r}")
    return globals()[name]


__all__ = ["fixed_5_2", "fixed_10_2", "fixed_10_4", "dynamic_2", "dynamic_4", "rate_trace_5", "get"]
