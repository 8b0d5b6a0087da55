"""Short-term fairness metrics: targets, windowed throughputs, loss and objective."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from .exceptions import FairnessError


class MetricMode(str, Enum):
    """Indicator throughput (packets/slot) or Shannon-rate throughput (bits/s)."""

    INDICATOR = "indicator"
    RATE = "rate"


def gamma_target(active_count: int, n_rbs: int) -> float:
    """Instantaneous fair share min(1, N/|K(t)|)."""
    if active_count < 1:
        raise FairnessError("Target throughput is undefined for a slot with no active users")
    return min(1.0, n_rbs / active_count)


def rate_target(active_count: int, n_rbs: int, rates_for_user: Sequence[float]) -> float:
    """Upper bound on a user's fair rate share: min(1, N/|K(t)|) times its best RB rate."""
    rates = np.asarray(rates_for_user, dtype=float)
    if rates.size == 0:
        raise FairnessError("Rate target needs at least one RB rate")
    return gamma_target(active_count, n_rbs) * float(rates.max())


def window_start(t: int, t_arr: int, window: int) -> int:
    return max(t_arr, t - window)


def windowed_average(series: Sequence[float], t: int, t_arr: int, window: int) -> float:
    """Mean of ``series`` over slots [max(t_arr, t - window) : t].

    ``series[0]`` is the value at slot ``t_arr``.
    """

    start = window_start(t, t_arr, window)
    values = np.asarray(series, dtype=float)[start - t_arr : t - t_arr + 1]
    return float(values.mean())


def windowed_series(series: Sequence[float], window: int) -> np.ndarray:
    """Windowed average at every slot of a user's lifetime."""

    values = np.asarray(series, dtype=float)
    if values.size == 0:
        return values
    padded = np.concatenate((np.zeros(window), values))
    sums = np.lib.stride_tricks.sliding_window_view(padded, window + 1).sum(axis=1)
    counts = np.minimum(np.arange(values.size), window) + 1
    return sums / counts


@dataclass
class UserLedger:
    """Per-slot throughput and target series of one user."""

    user_id: int
    t_arr: int
    gamma: List[float] = field(default_factory=list)
    target: List[float] = field(default_factory=list)
    choices: List[int] = field(default_factory=list)
    collided: List[int] = field(default_factory=list)
    t_dep: Optional[int] = None

    @property
    def duration(self) -> int:
        return len(self.gamma)

    @property
    def departed(self) -> bool:
        return self.t_dep is not None

    def record(self, gamma: float, target: float, choice: int = 0, collided: int = 0) -> None:
        if self.departed:
            raise FairnessError(f"User {self.user_id} already departed at slot {self.t_dep}")
        self.gamma.append(float(gamma))
        self.target.append(float(target))
        self.choices.append(int(choice))
        self.collided.append(int(collided))

    def close(self) -> None:
        self.t_dep = self.t_arr + self.duration - 1

    def achieved(self, window: int) -> np.ndarray:
        return windowed_series(self.gamma, window)

    def targets(self, window: int) -> np.ndarray:
        return windowed_series(self.target, window)


class FairnessLedger:
    """Ledgers of all users seen in a run."""

    def __init__(self, mode: MetricMode = MetricMode.INDICATOR) -> None:
        self.mode = MetricMode(mode)
        self.users: Dict[int, UserLedger] = {}

    def open(self, user_id: int, t_arr: int) -> UserLedger:
        if user_id in self.users:
            raise FairnessError(f"User {user_id} already has a ledger")
        ledger = UserLedger(user_id=user_id, t_arr=t_arr)
        self.users[user_id] = ledger
        return ledger

    def __getitem__(self, user_id: int) -> UserLedger:
        return self.users[user_id]

    def __contains__(self, user_id: int) -> bool:
        return user_id in self.users

    def close_all(self) -> None:
        for ledger in self.users.values():
            if not ledger.departed:
                ledger.close()

    def completed(self) -> List[UserLedger]:
        return [u for u in self.users.values() if u.departed and u.duration > 0]


def _slot_losses(achieved: np.ndarray, target: np.ndarray, mode: MetricMode) -> np.ndarray:
    gap = target - achieved
    if mode is MetricMode.INDICATOR:
        return np.maximum(gap, 0.0)
    ratio = np.divide(gap, target, out=np.zeros_like(gap), where=target > 0)
    return np.maximum(ratio, 0.0)


def throughput_loss(ledger: FairnessLedger, user_id: int, window: int) -> float:
    """Average shortfall of the windowed throughput against its windowed target.

    Indicator mode averages max(target - achieved, 0); rate mode averages the
    loss ratio max((target - achieved) / target, 0), with zero-target slots
    contributing nothing.
    """

    user = ledger[user_id]
    if not user.departed:
        raise FairnessError(f"User {user_id} has not departed; its loss is not final")
    if user.duration == 0:
        return 0.0
    losses = _slot_losses(user.achieved(window), user.targets(window), ledger.mode)
    return float(losses.mean())


def objective_weights(durations: Sequence[int]) -> np.ndarray:
    total = float(np.sum(durations))
    if total <= 0:
        raise FairnessError("Weighted objective needs at least one completed user")
    return np.asarray(durations, dtype=float) / total


def weighted_objective(durations: Sequence[int], losses: Sequence[float]) -> float:
    """Duration-weighted mean of the per-user losses."""
    if len(durations) != len(losses):
        raise FairnessError("durations and losses must have equal length")
    weights = objective_weights(durations)
    return float(np.dot(weights, np.asarray(losses, dtype=float)))


def ledger_objective(ledger: FairnessLedger, window: int) -> float:
    users = ledger.completed()
    durations = [u.duration for u in users]
    losses = [throughput_loss(ledger, u.user_id, window) for u in users]
    return weighted_objective(durations, losses)
