"""Experiment orchestrator: the slot loop wiring population, agents, medium and metrics."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple, TypeVar

import numpy as np
import pandas as pd

from . import learner
from .baselines import PfState, centralized_max_rate, centralized_pf, random_access_baseline, update_pf_state
from .channel import FadingState, RateTable, evolve_fading, rate_table
from .config import ExperimentConfig
from .env import IDLE, Feedback, resolve_slot
from .exceptions import NumericError
from .fairness import FairnessLedger, MetricMode, gamma_target, ledger_objective, rate_target, throughput_loss
from .learner import Agent, TrainingSchedule
from .policy import AgentObservation, DecisionSchedule, compute_reward
from .population import FixedK, PoissonDynamic, Population, TraceDriven, load_trace, static_positions
from .report import (
    DECISION_COLUMNS,
    SLOT_COLUMNS,
    USER_BASE_COLUMNS,
    MetricsLog,
    RunSummary,
    delta_column,
)

logger = logging.getLogger(__name__)

# spawn keys of the independent random streams derived from the master seed
AGENT_STREAM = 1
POPULATION_STREAM = 3
BASELINE_STREAM = 4
PLACEMENT_STREAM = 5

T = TypeVar("T")


@dataclass
class _WindowTrace:
    """What one participant experienced during the executed part of a window."""

    action: np.ndarray
    feedback: List[Feedback]
    rates: List[np.ndarray]
    last_normalized: Optional[np.ndarray] = None


@dataclass
class _Counters:
    transmissions: int = 0
    collided: int = 0
    late_transmissions: int = 0
    late_collided: int = 0
    busy_slots: int = 0


class Simulation:
    """One run of a configured experiment."""

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.radio = config.radio()
        self.mode = MetricMode.RATE if config.rate_mode else MetricMode.INDICATOR
        self.population = self._build_population()
        self.ledger = FairnessLedger(self.mode)
        self.schedule = DecisionSchedule(config.k_max)
        self.fading = FadingState(config.n_rbs, seed=config.seed)
        self.pf = PfState(config.slot_window)
        self.baseline_rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(BASELINE_STREAM,))
        )
        self.agents: Dict[int, Agent] = {}
        self.decisions: List[Tuple[int, int, int, int]] = []
        self.counters = _Counters()
        self._executor: Optional[ThreadPoolExecutor] = None

    @property
    def learning(self) -> bool:
        return self.config.baseline == "none"

    @property
    def needs_rates(self) -> bool:
        return self.config.rate_mode or self.config.baseline in ("max_rate", "pf")

    def _build_population(self) -> Population:
        cfg = self.config
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(POPULATION_STREAM,)))
        if cfg.scenario == "fixed":
            return Population.materialize(FixedK(cfg.n_users), cfg.horizon)
        if cfg.trace_path is not None:
            records = load_trace(cfg.trace_path, cell_radius=cfg.cell_radius)
            return Population.materialize(TraceDriven(tuple(records)), cfg.horizon)
        population = Population.materialize(PoissonDynamic(cfg.arrival_rate, cfg.t_min, cfg.t_max), cfg.horizon, rng)
        if cfg.rate_mode:
            placement = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(PLACEMENT_STREAM,)))
            population = Population(static_positions(population.records, cfg.cell_radius, placement), cfg.horizon)
        return population

    def _new_agent(self, user_id: int) -> Agent:
        cfg = self.config
        agent = Agent(
            user_id,
            cfg.n_rbs,
            cfg.k_max,
            rate_mode=cfg.rate_mode,
            lstm_hidden=cfg.lstm_hidden,
            value_hidden=cfg.value_hidden,
            learning_rate=cfg.learning_rate,
            tau=cfg.tau,
            minibatch=cfg.minibatch,
            buffer_capacity=cfg.buffer_capacity,
            schedule=TrainingSchedule(
                cfg.train_every, cfg.sync_every, cfg.epsilon, cfg.epsilon_decay, cfg.epsilon_floor
            ),
            seed=np.random.SeedSequence(cfg.seed, spawn_key=(AGENT_STREAM, user_id)),
        )
        if cfg.warm_start is not None:
            agent.warm_start(cfg.warm_start)
        return agent

    def _map(self, fn: Callable[[int], T], user_ids: Iterable[int]) -> List[T]:
        ids = list(user_ids)
        if self._executor is None:
            return [fn(u) for u in ids]
        return list(self._executor.map(fn, ids))

    def _admit(self, active: np.ndarray, t: int) -> None:
        for user_id in (int(u) for u in active):
            if user_id in self.ledger:
                continue
            self.ledger.open(user_id, t)
            if self.needs_rates:
                self.fading.add_user(user_id)
            if self.learning:
                self.agents[user_id] = self._new_agent(user_id)
            logger.debug("arrival user=%d t=%d", user_id, t)

    def _retire(self, active: np.ndarray, t: int) -> None:
        for user_id in (int(u) for u in active):
            if self.population.get(user_id).t_dep == t:
                self.ledger[user_id].close()
                self.fading.remove_user(user_id)
                self.pf.drop(user_id)

    def _rates(self, active: np.ndarray, t: int) -> Optional[RateTable]:
        if not self.needs_rates:
            return None
        user_ids = [int(u) for u in active]
        if not self.config.rate_mode:
            return RateTable.uniform(user_ids, self.config.n_rbs)
        positions = {u: self.population.get(u).position(t) for u in user_ids}
        table = rate_table(positions, self.fading, self.radio)
        if not np.all(np.isfinite(table.rates)):
            raise NumericError(f"Non-finite rates at slot {t} for users {user_ids}")
        return table

    def _baseline_choices(self, active: np.ndarray, rates: Optional[RateTable]) -> Dict[int, int]:
        cfg = self.config
        if cfg.baseline == "max_rate":
            return centralized_max_rate(rates, cfg.n_rbs).assignment
        if cfg.baseline == "pf":
            return centralized_pf(rates, self.pf, cfg.n_rbs).assignment
        p = cfg.aloha_p if cfg.aloha_p is not None else min(1.0, cfg.n_rbs / len(active))
        return random_access_baseline((int(u) for u in active), cfg.n_rbs, p, self.baseline_rng)

    def _decide(self, participants: List[int], window: int, active_count: int) -> Dict[int, np.ndarray]:
        def step(user_id: int) -> np.ndarray:
            agent = self.agents[user_id]
            return learner.act(agent, agent.observation, window, active_count)

        return dict(zip(participants, self._map(step, participants)))

    def _learn(self, traces: Dict[int, _WindowTrace]) -> None:
        rate_mode = self.config.rate_mode

        def step(user_id: int) -> None:
            agent = self.agents[user_id]
            trace = traces[user_id]
            executed = len(trace.feedback)
            action = trace.action[:executed]
            rewards, _ = compute_reward(action, trace.feedback, trace.rates if rate_mode else None)
            prev_rates = trace.last_normalized if rate_mode else None
            learner.observe(agent, action, rewards, AgentObservation(action, rewards, prev_rates))

        self._map(step, sorted(traces))

    def _play_slot(
        self,
        t: int,
        active: np.ndarray,
        actions: Dict[int, np.ndarray],
        column: int,
        traces: Dict[int, _WindowTrace],
    ) -> None:
        cfg = self.config
        self._admit(active, t)
        rates = self._rates(active, t)

        if self.learning:
            user_ids = [int(u) for u in active]
            choices = {u: int(actions[u][column]) if u in actions else IDLE for u in user_ids}
        else:
            choices = self._baseline_choices(active, rates)
        outcome = resolve_slot(choices, cfg.n_rbs)

        count = len(active)
        late = t > cfg.horizon // 2
        achieved: Dict[int, float] = {}
        for user_id, choice in choices.items():
            success = outcome.success[user_id]
            collided = int(choice != IDLE and not success)
            rate = float(rates.row(user_id)[choice - 1]) if rates is not None and choice != IDLE else 0.0
            if cfg.rate_mode:
                gamma = rate * success
                target = rate_target(count, cfg.n_rbs, rates.row(user_id))
            else:
                gamma = float(success)
                target = gamma_target(count, cfg.n_rbs)
            self.ledger[user_id].record(gamma, target, choice, collided)
            achieved[user_id] = rate * success
            if choice != IDLE:
                self.counters.transmissions += 1
                self.counters.collided += collided
                if late:
                    self.counters.late_transmissions += 1
                    self.counters.late_collided += collided
            if user_id in traces:
                traces[user_id].feedback.append(outcome.feedback)
                traces[user_id].rates.append(rates.row(user_id) if rates is not None else np.ones(cfg.n_rbs))
                if cfg.rate_mode:
                    traces[user_id].last_normalized = rates.normalized_row(user_id)
        if cfg.baseline == "pf":
            update_pf_state(self.pf, achieved)
        self.counters.busy_slots += 1
        self._retire(active, t)
        if self.needs_rates and self.fading.streams:
            evolve_fading(self.fading, cfg.fading_correlation)

    def run(self) -> Tuple[MetricsLog, RunSummary]:
        cfg = self.config
        logger.info(
            "run start scenario=%s baseline=%s seed=%d horizon=%d n_rbs=%d users=%d",
            cfg.scenario,
            cfg.baseline,
            cfg.seed,
            cfg.horizon,
            cfg.n_rbs,
            len(self.population),
        )
        if cfg.workers > 1 and self.learning:
            self._executor = ThreadPoolExecutor(max_workers=cfg.workers)
        try:
            self._loop()
        finally:
            if self._executor is not None:
                self._executor.shutdown()
                self._executor = None
        self.ledger.close_all()
        if cfg.save_weights and self.learning:
            self._save_weights(Path(cfg.out_dir) / "weights")
        log, summary = self._collect()
        logger.info(
            "run done sum_throughput=%.6g objective=%.6g collision_rate=%.4f",
            summary.sum_throughput,
            summary.weighted_objective,
            summary.collision_rate,
        )
        return log, summary

    def _loop(self) -> None:
        horizon = self.config.horizon
        t = 1
        while t <= horizon:
            active = self.population.active_ids(t)
            if active.size == 0:
                self.schedule.skip_idle_slot()
                t += 1
                continue
            self._admit(active, t)
            next_t, window = self.schedule.advance(len(active))
            self.decisions.append((len(self.schedule.windows), t, window, len(active)))
            logger.debug("window t=%d k=%d active=%d", t, window, len(active))

            participants = [int(u) for u in active]
            actions: Dict[int, np.ndarray] = {}
            traces: Dict[int, _WindowTrace] = {}
            if self.learning:
                actions = self._decide(participants, window, len(active))
                traces = {u: _WindowTrace(actions[u], [], []) for u in participants}

            for column, slot in enumerate(range(t, min(next_t, horizon + 1))):
                slot_active = active if slot == t else self.population.active_ids(slot)
                if slot_active.size == 0:
                    continue
                self._play_slot(slot, slot_active, actions, column, traces)

            if self.learning:
                self._learn(traces)
                # agents alive at the horizon stay for save_weights
                departed = [
                    u for u in self.agents if self.population.get(u).t_dep < min(next_t, horizon)
                ]
                for user_id in departed:
                    del self.agents[user_id]
            t = next_t

    def _save_weights(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        for user_id, agent in sorted(self.agents.items()):
            agent.save(directory / f"user_{user_id}.npz")
        logger.info("weights saved dir=%s agents=%d", directory, len(self.agents))

    def _collect(self) -> Tuple[MetricsLog, RunSummary]:
        cfg = self.config
        users = sorted(self.ledger.users.values(), key=lambda u: u.user_id)
        slot_frames = []
        user_rows = []
        for user in users:
            if user.duration == 0:
                continue
            slot_frames.append(
                pd.DataFrame(
                    {
                        "t": np.arange(user.t_arr, user.t_arr + user.duration, dtype=np.int64),
                        "user_id": user.user_id,
                        "choice": np.asarray(user.choices, dtype=np.int64),
                        "gamma": np.asarray(user.gamma, dtype=float),
                        "Gamma": user.achieved(cfg.slot_window),
                        "Gamma_target": user.targets(cfg.slot_window),
                        "collided": np.asarray(user.collided, dtype=np.int64),
                    }
                )
            )
            row = [user.user_id, user.t_arr, user.t_dep, float(np.mean(user.gamma)), float(np.mean(user.target))]
            row.extend(throughput_loss(self.ledger, user.user_id, w) for w in cfg.windows)
            user_rows.append(row)

        if slot_frames:
            slots = pd.concat(slot_frames, ignore_index=True)
            slots = slots.sort_values(["t", "user_id"], kind="mergesort").reset_index(drop=True)
        else:
            slots = pd.DataFrame(columns=SLOT_COLUMNS)
        user_columns = USER_BASE_COLUMNS + [delta_column(w) for w in cfg.windows]
        users_df = pd.DataFrame(user_rows, columns=user_columns)
        decisions = pd.DataFrame(self.decisions, columns=DECISION_COLUMNS)

        c = self.counters
        total_gamma = float(slots["gamma"].sum()) if len(slots) else 0.0
        objective = ledger_objective(self.ledger, cfg.slot_window) if self.ledger.completed() else float("nan")
        summary = RunSummary(
            sum_throughput=total_gamma / cfg.horizon,
            weighted_objective=objective,
            collision_rate=c.collided / c.transmissions if c.transmissions else 0.0,
            seed=cfg.seed,
            scenario=cfg.scenario,
            baseline=cfg.baseline,
            n_users=len(users_df),
            busy_slots=c.busy_slots,
            transmissions=c.transmissions,
            late_collision_rate=c.late_collided / c.late_transmissions if c.late_transmissions else 0.0,
            mean_delta={w: float(users_df[delta_column(w)].mean()) if len(users_df) else 0.0 for w in cfg.windows},
        )
        log = MetricsLog(slots=slots, users=users_df, decisions=decisions, summary=summary.as_frame())
        return log, summary


def run_experiment(config: ExperimentConfig) -> Tuple[MetricsLog, RunSummary]:
    """Run one configured experiment to its horizon."""
    return Simulation(config).run()
