"""Centralized reference schedulers and a p-persistent random-access baseline."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, Mapping, Optional

import numpy as np

from .channel import RateTable
from .exceptions import ConfigError

PF_FLOOR = 1e-6


@dataclass(frozen=True)
class ScheduleAssignment:
    """Per-user choice for one slot; nonzero RBs are distinct."""

    assignment: Dict[int, int]


def centralized_max_rate(rates: RateTable, n_rbs: int) -> ScheduleAssignment:
    """Greedy (user, RB) matching: each round takes the best remaining pair.

    Ties go to the lowest user id, then the lowest RB.
    """

    order = np.argsort(rates.user_ids, kind="stable")
    user_ids = [rates.user_ids[i] for i in order]
    metric = np.array(rates.rates, dtype=float)[order, :n_rbs].copy()
    assignment = {u: 0 for u in user_ids}
    for _ in range(min(len(user_ids), n_rbs)):
        flat = int(np.argmax(metric))
        k_star, n_star = divmod(flat, n_rbs)
        assignment[user_ids[k_star]] = n_star + 1
        metric[k_star, :] = -np.inf
        metric[:, n_star] = -np.inf
    return ScheduleAssignment(assignment)


@dataclass
class PfState:
    """Sliding-window average of each user's achieved rate."""

    window: int
    history: Dict[int, Deque[float]] = field(default_factory=dict)

    def average(self, user_id: int) -> float:
        samples = self.history.get(user_id)
        if not samples:
            return 0.0
        return float(np.mean(samples))

    def drop(self, user_id: int) -> None:
        self.history.pop(user_id, None)


def centralized_pf(rates: RateTable, pf: PfState, n_rbs: int, floor: float = PF_FLOOR) -> ScheduleAssignment:
    """Max-rate greedy on the PF metric c / max(r_ave, floor)."""
    averages = np.array([max(pf.average(u), floor) for u in rates.user_ids])
    metric = RateTable(rates.user_ids, np.asarray(rates.rates, dtype=float) / averages[:, None])
    return centralized_max_rate(metric, n_rbs)


def update_pf_state(pf: PfState, achieved: Mapping[int, float], window: Optional[int] = None) -> PfState:
    """Append this slot's achieved rate for every listed user (0 when unscheduled).

    The window holds window+1 samples, matching the inclusive averaging bounds.
    """

    size = (window if window is not None else pf.window) + 1
    for user_id, rate in achieved.items():
        samples = pf.history.get(user_id)
        if samples is None or samples.maxlen != size:
            samples = deque(samples or (), maxlen=size)
            pf.history[user_id] = samples
        samples.append(float(rate))
    return pf


def random_access_baseline(
    users: Iterable[int], n_rbs: int, p: float, rng: np.random.Generator
) -> Dict[int, int]:
    """Each user transmits with probability ``p`` on a uniformly drawn RB."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"Transmit probability must lie in [0, 1], got {p}")
    choices: Dict[int, int] = {}
    for user_id in sorted(users):
        transmit = rng.random() < p
        choices[user_id] = int(rng.integers(1, n_rbs + 1)) if transmit else 0
    return choices
