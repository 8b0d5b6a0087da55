"""Path-loss and temporally correlated Rayleigh fading, mapped to per-RB Shannon rates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .exceptions import ChannelError, TrajectoryError

logger = logging.getLogger(__name__)

FADING_STREAM = 2


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


class RadioParams(BaseModel):
    """Radio environment; dB-valued inputs are converted to linear units on access."""

    bandwidth_hz: float = Field(20e6, gt=0, description="System bandwidth W")
    tx_power_dbm: float = Field(23.0, description="Transmit power P")
    noise_psd_dbm_hz: float = Field(-174.0, description="Noise power spectral density N0")
    n_rbs: int = Field(..., ge=1)
    pathloss_exponent: float = Field(3.38, ge=2.0)
    fading_correlation: float = Field(0.9, ge=0.0, lt=1.0)
    cell_radius: float = Field(500.0, gt=0)
    min_distance: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def validate_geometry(self) -> "RadioParams":
        if self.min_distance > self.cell_radius:
            raise ChannelError("min_distance must not exceed the cell radius")
        return self

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    @property
    def noise_psd_w_hz(self) -> float:
        return dbm_to_watts(self.noise_psd_dbm_hz)

    @property
    def rb_bandwidth_hz(self) -> float:
        return self.bandwidth_hz / self.n_rbs


def path_gain(position: Tuple[float, float], rho: float, min_distance: float = 1.0) -> float:
    """Large-scale gain ||u||^-rho, with the distance floored at ``min_distance``."""
    distance = max(float(np.hypot(position[0], position[1])), min_distance)
    return distance ** (-rho)


def complex_normal(rng: np.random.Generator, variance: float, size: int | None = None) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


@dataclass
class FadingState:
    """Small-scale coefficient h per (user, RB), each link with its own innovation stream."""

    n_rbs: int
    seed: int = 0
    h: Dict[int, np.ndarray] = field(default_factory=dict)
    streams: Dict[int, List[np.random.Generator]] = field(default_factory=dict)

    def add_user(self, user_id: int) -> None:
        streams = [
            np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(FADING_STREAM, user_id, rb)))
            for rb in range(self.n_rbs)
        ]
        self.streams[user_id] = streams
        self.h[user_id] = np.array([complex(complex_normal(s, 1.0)) for s in streams])

    def remove_user(self, user_id: int) -> None:
        self.h.pop(user_id, None)
        self.streams.pop(user_id, None)

    def __contains__(self, user_id: int) -> bool:
        return user_id in self.h


def evolve_fading(state: FadingState, xi: float, rng: Optional[np.random.Generator] = None) -> FadingState:
    """Advance every link one slot: h(t) = xi h(t-1) + delta, delta ~ CN(0, 1 - xi^2).

    Innovations come from each link's own stream unless ``rng`` is given.
    """

    if not 0.0 <= xi < 1.0:
        raise ChannelError(f"Fading correlation must lie in [0, 1), got {xi}")
    innovation_var = 1.0 - xi**2
    for user_id in sorted(state.streams):
        if rng is None:
            delta = np.array([complex(complex_normal(s, innovation_var)) for s in state.streams[user_id]])
        else:
            delta = complex_normal(rng, innovation_var, state.n_rbs)
        state.h[user_id] = xi * state.h[user_id] + delta
    return state


def shannon_rate(gain: float | np.ndarray, params: RadioParams) -> float | np.ndarray:
    """Achievable rate in bits/s on one RB of bandwidth W/N."""
    bw = params.rb_bandwidth_hz
    snr = np.asarray(gain, dtype=float) * params.tx_power_w / (bw * params.noise_psd_w_hz)
    rate = bw * np.log2(1.0 + snr)
    return float(rate) if np.ndim(rate) == 0 else rate


@dataclass(frozen=True)
class RateTable:
    """Per-RB rates of the active users at one slot; rows follow ``user_ids``."""

    user_ids: Tuple[int, ...]
    rates: np.ndarray

    def row(self, user_id: int) -> np.ndarray:
        return self.rates[self.user_ids.index(user_id)]

    def normalized_row(self, user_id: int) -> np.ndarray:
        row = self.row(user_id)
        best = row.max()
        if best <= 0:
            logger.warning("zero-rate row user=%d", user_id)
            return np.zeros_like(row)
        return row / best

    @classmethod
    def uniform(cls, user_ids: Sequence[int], n_rbs: int) -> "RateTable":
        return cls(tuple(user_ids), np.ones((len(user_ids), n_rbs)))


def rate_table(
    positions: Mapping[int, Optional[Tuple[float, float]]],
    fading: FadingState,
    params: RadioParams,
) -> RateTable:
    """Rates c[k][n] = shannon_rate(path_gain * |h_k^n|^2) for every user in ``positions``."""

    user_ids = tuple(sorted(positions))
    rates = np.zeros((len(user_ids), params.n_rbs))
    for row, user_id in enumerate(user_ids):
        position = positions[user_id]
        if position is None:
            raise TrajectoryError(f"No position for user {user_id}")
        if user_id not in fading:
            raise TrajectoryError(f"No fading state for user {user_id}")
        large_scale = path_gain(position, params.pathloss_exponent, params.min_distance)
        rates[row] = shannon_rate(large_scale * np.abs(fading.h[user_id]) ** 2, params)
    return RateTable(user_ids, rates)
