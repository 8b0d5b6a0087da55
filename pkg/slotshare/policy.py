"""Decision-window protocol: schedule, action space, action construction, reward and state."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .env import Feedback
from .exceptions import EncodingError, ScheduleError


@dataclass
class DecisionSchedule:
    """Synchronous decision times shared by all agents.

    ``boundaries[i]`` is T[i+1] and ``windows[i]`` is K[i+1]; ``current`` is the
    next boundary to be opened.
    """

    k_max: int
    current: int = 1
    boundaries: List[int] = field(default_factory=list)
    windows: List[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.k_max < 1:
            raise ScheduleError(f"k_max must be positive, got {self.k_max}")

    def window_for(self, active_count: int) -> int:
        if active_count < 1:
            raise ScheduleError("A decision window needs at least one active user")
        return min(active_count, self.k_max)

    def advance(self, active_count: int) -> Tuple[int, int]:
        window = self.window_for(active_count)
        self.boundaries.append(self.current)
        self.windows.append(window)
        self.current += window
        return self.current, window

    def skip_idle_slot(self) -> None:
        """Slots with no active user open no window."""
        self.current += 1


def next_decision(schedule: DecisionSchedule, active_count: int) -> Tuple[int, int]:
    """Open the window at the current boundary; returns (T[i+1], K[i])."""
    return schedule.advance(active_count)


def action_space_size(window: int, n_rbs: int) -> int:
    """Number of vectors in [0:N]^K with at most min(K, N) nonzero entries."""
    if window < 1 or n_rbs < 1:
        raise ScheduleError("window and n_rbs must be positive")
    return sum(comb(window, m) * n_rbs**m for m in range(min(window, n_rbs) + 1))


def sample_uniform_action(window: int, n_rbs: int, rng: np.random.Generator) -> np.ndarray:
    """Draw uniformly from the valid action space of a window."""

    limit = min(window, n_rbs)
    weights = np.array([comb(window, m) * n_rbs**m for m in range(limit + 1)], dtype=float)
    nonzeros = int(rng.choice(limit + 1, p=weights / weights.sum()))
    action = np.zeros(window, dtype=np.int64)
    if nonzeros:
        columns = rng.choice(window, size=nonzeros, replace=False)
        action[columns] = rng.integers(1, n_rbs + 1, size=nonzeros)
    return action


def keep_probability(n_rbs: int, k_max: int, active_count: int) -> float:
    """Probability that a scheduled entry survives thinning."""
    if n_rbs >= active_count:
        return 1.0
    return min(1.0, max(n_rbs, k_max) / active_count)


def greedy_action(q: np.ndarray, window: int, n_rbs: int) -> np.ndarray:
    """Rounds of (sub-action, column) argmax over the unassigned columns.

    Ties resolve to the lowest sub-action, then the lowest column.
    """

    action = np.zeros(window, dtype=np.int64)
    columns = list(range(window))
    for _ in range(min(window, n_rbs)):
        sub = q[:, columns]
        flat = int(np.argmax(sub))
        a_star, pos = divmod(flat, len(columns))
        action[columns[pos]] = a_star
        del columns[pos]
    return action


def select_action(
    q: np.ndarray,
    window: int,
    n_rbs: int,
    active_count: int,
    k_max: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Build a window schedule from a (N+1) x K_max Q-matrix, then thin it under overload."""

    if window > k_max:
        raise ScheduleError(f"Window {window} exceeds k_max {k_max}")
    if q.shape != (n_rbs + 1, k_max):
        raise ScheduleError(f"Q-matrix shape {q.shape} != {(n_rbs + 1, k_max)}")
    action = greedy_action(q, window, n_rbs)
    if n_rbs < active_count:
        drop = 1.0 - keep_probability(n_rbs, k_max, active_count)
        action[rng.random(window) < drop] = 0
    return action


def compute_reward(
    action: Sequence[int],
    feedback: Sequence[Feedback],
    rates: Optional[Sequence[Sequence[float]]] = None,
) -> Tuple[np.ndarray, float]:
    """Per-slot rewards of an executed window and their sum.

    Indicator mode: +1 on ACK, 0 when idle, -1 otherwise. With ``rates`` the
    ratio of the chosen RB's rate to the slot's best rate is added to the
    nonidle cases.
    """

    action = np.asarray(action, dtype=np.int64)
    if len(feedback) < len(action):
        raise ScheduleError("Feedback is missing for some slots of the window")
    rewards = np.zeros(len(action), dtype=float)
    for j, rb in enumerate(action):
        if rb == 0:
            continue
        base = 1.0 if feedback[j].is_ack(int(rb)) else -1.0
        if rates is not None:
            row = np.asarray(rates[j], dtype=float)
            best = row.max()
            base += float(row[rb - 1] / best) if best > 0 else 0.0
        rewards[j] = base
    return rewards, float(rewards.sum())


@dataclass(frozen=True)
class AgentObservation:
    """What an agent saw in its previous window."""

    prev_action: np.ndarray
    prev_rewards: np.ndarray
    prev_rates: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if len(self.prev_action) != len(self.prev_rewards):
            raise EncodingError("prev_action and prev_rewards must have equal length")

    @classmethod
    def initial(cls, n_rbs: int, rate_mode: bool = False) -> "AgentObservation":
        rates = np.zeros(n_rbs) if rate_mode else None
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0), rates)


def encoded_size(n_rbs: int, k_max: int, rate_mode: bool = False) -> int:
    return (n_rbs + 1) * k_max + k_max + (n_rbs if rate_mode else 0)


def encode_state(obs: AgentObservation, n_rbs: int, k_max: int, rate_mode: bool = False) -> np.ndarray:
    """Fixed-size network input: one-hot action block, reward block, optional rate block.

    Columns past the previous window's length stay zero.
    """

    length = len(obs.prev_action)
    if length > k_max:
        raise EncodingError(f"Observation window {length} exceeds k_max {k_max}")
    x = np.zeros(encoded_size(n_rbs, k_max, rate_mode))
    actions = np.asarray(obs.prev_action, dtype=np.int64)
    if length:
        if actions.min() < 0 or actions.max() > n_rbs:
            raise EncodingError(f"Action entries must lie in [0:{n_rbs}]")
        x[np.arange(length) * (n_rbs + 1) + actions] = 1.0
        offset = (n_rbs + 1) * k_max
        x[offset : offset + length] = obs.prev_rewards
    if rate_mode:
        if obs.prev_rates is None or len(obs.prev_rates) != n_rbs:
            raise EncodingError(f"Rate-mode observations need {n_rbs} normalized rates")
        x[-n_rbs:] = obs.prev_rates
    return x
