"""Experiment configuration."""

from __future__ import annotations

import json
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, model_validator

from .channel import RadioParams
from .exceptions import ConfigError

Scenario = Literal["fixed", "dynamic", "rate"]
Baseline = Literal["none", "max_rate", "pf", "aloha"]


class ExperimentConfig(BaseModel):
    """All parameters of one run. Defaults are the reference training setup."""

    model_config = ConfigDict(extra="forbid")

    scenario: Scenario = "fixed"
    n_rbs: int = Field(..., ge=1, description="Number of resource blocks N")
    k_max: int = Field(5, ge=1, description="Cap on the decision window length")

    n_users: int = Field(5, ge=1, description="Population size of the fixed scenario")
    arrival_rate: float = Field(0.02, gt=0, description="Poisson arrivals per slot")
    t_min: int = Field(100, ge=1, description="Shortest activation time in slots")
    t_max: int = Field(200, ge=1, description="Longest activation time in slots")
    trace_path: Optional[str] = Field(None, description="Mobility trace replacing Poisson arrivals")
    cell_radius: float = Field(500.0, gt=0)

    windows: List[int] = Field(default_factory=lambda: [5, 10, 20])
    slot_window: int = Field(20, ge=1, description="Averaging window of the per-slot log")
    horizon: int = Field(50_000, ge=1)

    lstm_hidden: int = Field(64, ge=1)
    value_hidden: int = Field(32, ge=1)
    learning_rate: float = Field(0.01, gt=0, le=1)
    tau: float = Field(0.95, ge=0, le=1, description="Discount factor")
    epsilon: float = Field(0.1, ge=0, le=1)
    epsilon_decay: float = Field(0.995, gt=0, le=1)
    epsilon_floor: float = Field(0.001, ge=0, le=1)
    minibatch: int = Field(40, ge=1)
    train_every: int = Field(5, ge=1, description="T_1: decisions between trainings")
    sync_every: int = Field(10, ge=1, description="T_2: trainings between target syncs")
    buffer_capacity: int = Field(2000, ge=1)

    bandwidth_hz: float = Field(20e6, gt=0)
    tx_power_dbm: float = 23.0
    noise_psd_dbm_hz: float = -174.0
    pathloss_exponent: float = Field(3.38, ge=2)
    fading_correlation: float = Field(0.9, ge=0, lt=1)
    min_distance: float = Field(1.0, gt=0)

    baseline: Baseline = "none"
    aloha_p: Optional[float] = Field(None, ge=0, le=1)

    seed: int = Field(0, ge=0, lt=2**64)
    out_dir: str = "runs"
    workers: int = Field(1, ge=1)
    warm_start: Optional[str] = None
    save_weights: bool = False

    @model_validator(mode="after")
    def validate_consistency(self) -> "ExperimentConfig":
        if self.t_min > self.t_max:
            raise ConfigError(f"t_min must not exceed t_max: {self.t_min}>{self.t_max}")
        if not self.windows or any(w < 1 for w in self.windows):
            raise ConfigError("windows must be a non-empty list of positive integers")
        if len(set(self.windows)) != len(self.windows):
            raise ConfigError("windows must be unique")
        if self.epsilon_floor > self.epsilon:
            raise ConfigError("epsilon_floor must not exceed epsilon")
        if self.min_distance > self.cell_radius:
            raise ConfigError(
                f"min_distance must not exceed cell_radius: {self.min_distance}>{self.cell_radius}"
            )
        return self

    @property
    def rate_mode(self) -> bool:
        return self.scenario == "rate"

    def radio(self) -> RadioParams:
        return RadioParams(
            bandwidth_hz=self.bandwidth_hz,
            tx_power_dbm=self.tx_power_dbm,
            noise_psd_dbm_hz=self.noise_psd_dbm_hz,
            n_rbs=self.n_rbs,
            pathloss_exponent=self.pathloss_exponent,
            fading_correlation=self.fading_correlation,
            cell_radius=self.cell_radius,
            min_distance=self.min_distance,
        )

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return validate_config(values)

    def to_file(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".json":
            path.write_text(self.model_dump_json(indent=2))
            return
        path.write_text(_as_toml(self.model_dump()))


def _as_toml(values: Dict[str, Any]) -> str:
    lines = []
    for key, value in values.items():
        if value is None:
            continue
        lines.append(f"{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"


def validate_config(values: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(values)
    except PydanticValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a flat ``key = value`` TOML file, or JSON when the suffix is ``.json``."""

    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            values = json.loads(text) if text.strip() else {}
        else:
            values = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"Cannot parse config {path}: {exc}") from exc
    return validate_config(values)
