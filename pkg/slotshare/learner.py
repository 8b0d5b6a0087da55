"""Per-user double Q-learning agent: epsilon-greedy acting, target construction, replay and sync."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Deque, List, Optional, Tuple

import numpy as np

from . import neuralnet
from .exceptions import ConfigError, NumericError, ScheduleError
from .neuralnet import AdamState, BranchingDuelingNet, LstmState
from .policy import AgentObservation, encode_state, encoded_size, sample_uniform_action, select_action

logger = logging.getLogger(__name__)


@dataclass
class TrainingSchedule:
    """Training cadence (T_1 decisions per training, T_2 trainings per sync) and exploration."""

    train_every: int = 5
    sync_every: int = 10
    epsilon: float = 0.1
    epsilon_decay: float = 0.995
    epsilon_floor: float = 0.001
    decisions: int = 0
    trainings: int = 0

    def __post_init__(self) -> None:
        if self.train_every < 1 or self.sync_every < 1:
            raise ScheduleError("train_every and sync_every must be positive")
        if not 0.0 <= self.epsilon_floor <= self.epsilon <= 1.0:
            raise ScheduleError("Exploration requires 0 <= epsilon_floor <= epsilon <= 1")

    def record_decision(self) -> Tuple[bool, bool]:
        """Count one stored decision; returns (train now, sync now)."""
        self.decisions += 1
        train = self.decisions % self.train_every == 0
        sync = self.decisions % (self.train_every * self.sync_every) == 0
        return train, sync

    def decay(self) -> None:
        self.trainings += 1
        self.epsilon = max(self.epsilon_floor, self.epsilon * self.epsilon_decay)


@dataclass(frozen=True)
class Transition:
    encoded: np.ndarray
    carried: LstmState
    target: np.ndarray
    mask: np.ndarray


class ReplayBuffer:
    """FIFO store of (state, carried LSTM state, target Q-matrix, mask)."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ConfigError(f"Buffer capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._entries: Deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, index: int) -> Transition:
        return self._entries[index]

    def push(self, transition: Transition) -> None:
        self._entries.append(transition)

    def sample(self, size: int, rng: np.random.Generator) -> List[Transition]:
        picks = rng.choice(len(self._entries), size=size, replace=False)
        return [self._entries[int(i)] for i in picks]


@dataclass
class _Pending:
    encoded: np.ndarray
    carried: LstmState
    q_alpha: np.ndarray


class DoubleDqn:
    """Online (alpha) and target (beta) networks of identical architecture."""

    def __init__(self, online: BranchingDuelingNet, target: Optional[BranchingDuelingNet] = None) -> None:
        self.online = online
        if target is None:
            target = BranchingDuelingNet(
                online.input_size, online.n_rbs, online.k_max, online.lstm_hidden, online.value_hidden
            )
            target.copy_from(online)
        self.target = target

    def sync(self) -> None:
        self.target.copy_from(self.online)


class Agent:
    """Independent learner owned by one user for its lifetime."""

    def __init__(
        self,
        user_id: int,
        n_rbs: int,
        k_max: int,
        *,
        rate_mode: bool = False,
        lstm_hidden: int = 64,
        value_hidden: int = 32,
        learning_rate: float = 0.01,
        tau: float = 0.95,
        minibatch: int = 40,
        buffer_capacity: int = 2000,
        schedule: Optional[TrainingSchedule] = None,
        seed: int | np.random.SeedSequence = 0,
    ) -> None:
        seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        init_seq, act_seq = seq.spawn(2)
        self.user_id = user_id
        self.n_rbs = n_rbs
        self.k_max = k_max
        self.rate_mode = rate_mode
        self.learning_rate = learning_rate
        self.tau = tau
        self.minibatch = minibatch
        self.schedule = schedule or TrainingSchedule()
        self.rng = np.random.default_rng(act_seq)
        online = BranchingDuelingNet(
            encoded_size(n_rbs, k_max, rate_mode),
            n_rbs,
            k_max,
            lstm_hidden,
            value_hidden,
            seed=np.random.default_rng(init_seq),
        )
        self.dqn = DoubleDqn(online)
        self.adam = AdamState()
        self.buffer = ReplayBuffer(buffer_capacity)
        self.carried = online.initial_state()
        self.observation = AgentObservation.initial(n_rbs, rate_mode)
        self._pending: Optional[_Pending] = None
        self.last_loss: Optional[float] = None

    @property
    def epsilon(self) -> float:
        return self.schedule.epsilon

    def encode(self, obs: AgentObservation) -> np.ndarray:
        return encode_state(obs, self.n_rbs, self.k_max, self.rate_mode)

    def warm_start(self, path: str | Path) -> None:
        snapshot = neuralnet.load_snapshot(path)
        self.dqn.online.copy_from(snapshot)
        self.dqn.sync()

    def save(self, path: str | Path) -> None:
        neuralnet.save_snapshot(self.dqn.online, path)


def _check_finite(agent: Agent, q: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(q)):
        raise NumericError(
            f"Non-finite Q-values for user {agent.user_id} during {where} "
            f"(decisions={agent.schedule.decisions}, trainings={agent.schedule.trainings}, "
            f"last_loss={agent.last_loss})"
        )


def act(agent: Agent, obs: AgentObservation, window: int, active_count: int) -> np.ndarray:
    """Epsilon-greedy window schedule from the online network."""

    if window > agent.k_max:
        raise ScheduleError(f"Window {window} exceeds k_max {agent.k_max}")
    encoded = agent.encode(obs)
    carried = agent.carried
    q, agent.carried = neuralnet.forward(agent.dqn.online, encoded, carried)
    _check_finite(agent, q, "act")
    agent._pending = _Pending(encoded=encoded, carried=carried, q_alpha=q)
    if agent.rng.random() < agent.schedule.epsilon:
        return sample_uniform_action(window, agent.n_rbs, agent.rng)
    return select_action(q, window, agent.n_rbs, active_count, agent.k_max, agent.rng)


def build_targets(
    agent: Agent,
    q_alpha_i: np.ndarray,
    action: np.ndarray,
    rewards: np.ndarray,
    next_obs: AgentObservation,
) -> Tuple[np.ndarray, np.ndarray]:
    """Double-Q targets for the executed columns of a window.

    The next state is evaluated from the agent's carried state. The argmax of
    each column comes from the online network; its value from the target network.
    """

    encoded_next = agent.encode(next_obs)
    q_alpha_next, _ = neuralnet.forward(agent.dqn.online, encoded_next, agent.carried)
    q_beta_next, _ = neuralnet.forward(agent.dqn.target, encoded_next, agent.carried)
    _check_finite(agent, q_beta_next, "target evaluation")
    target = np.array(q_alpha_i, dtype=float, copy=True)
    mask = np.zeros_like(target)
    for j, sub_action in enumerate(np.asarray(action, dtype=np.int64)):
        a_star = int(np.argmax(q_alpha_next[:, j]))
        target[sub_action, j] = rewards[j] + agent.tau * q_beta_next[a_star, j]
        mask[sub_action, j] = 1.0
    return target, mask


def train_step(agent: Agent, buffer: ReplayBuffer, minibatch_size: int) -> Optional[float]:
    """One Adam step on a uniform minibatch; returns the pre-step loss, or None if underfilled."""

    if len(buffer) < minibatch_size:
        return None
    batch = buffer.sample(minibatch_size, agent.rng)
    x = np.stack([t.encoded for t in batch])
    carried = LstmState(np.stack([t.carried.h for t in batch]), np.stack([t.carried.c for t in batch]))
    target = np.stack([t.target for t in batch])
    mask = np.stack([t.mask for t in batch])
    online = agent.dqn.online
    loss, grads = online.loss_and_gradients(x, carried, target, mask)
    neuralnet.adam_update(online.parameters(), grads, agent.adam, agent.learning_rate)
    agent.last_loss = loss
    return loss


def sync_target(agent: Agent) -> None:
    agent.dqn.sync()


def observe(agent: Agent, action: np.ndarray, rewards: np.ndarray, next_obs: AgentObservation) -> None:
    """Close the pending decision: store its targets, then train and sync on schedule."""

    if agent._pending is None:
        raise ScheduleError(f"User {agent.user_id} has no pending decision to close")
    pending = agent._pending
    executed = len(rewards)
    target, mask = build_targets(agent, pending.q_alpha, action[:executed], rewards, next_obs)
    agent.buffer.push(Transition(pending.encoded, pending.carried, target, mask))
    agent.observation = next_obs
    agent._pending = None

    train, sync = agent.schedule.record_decision()
    if train:
        loss = train_step(agent, agent.buffer, agent.minibatch)
        if loss is not None:
            agent.schedule.decay()
            logger.debug(
                "train user=%d loss=%.6f epsilon=%.4f", agent.user_id, loss, agent.schedule.epsilon
            )
    if sync:
        sync_target(agent)
        logger.debug("sync user=%d decisions=%d", agent.user_id, agent.schedule.decisions)
