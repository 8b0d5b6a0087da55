"""Run metrics and summary reporting."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict

import pandas as pd

SLOT_COLUMNS = ["t", "user_id", "choice", "gamma", "Gamma", "Gamma_target", "collided"]
USER_BASE_COLUMNS = ["user_id", "t_arr", "t_dep", "long_term_throughput", "long_term_target"]
SUMMARY_COLUMNS = ["sum_throughput", "weighted_objective", "collision_rate", "seed"]
DECISION_COLUMNS = ["decision", "T", "K", "active"]


def delta_column(window: int) -> str:
    return f"delta_Tw{window}"


@dataclass
class RunSummary:
    """Scalar results of one run."""

    sum_throughput: float
    weighted_objective: float
    collision_rate: float
    seed: int
    scenario: str = "fixed"
    baseline: str = "none"
    n_users: int = 0
    busy_slots: int = 0
    transmissions: int = 0
    late_collision_rate: float = 0.0
    mean_delta: Dict[int, float] = field(default_factory=dict)

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(self._as_json())

    def to_markdown(self, path: str | Path) -> None:
        Path(path).write_text(self._as_markdown())

    @classmethod
    def from_json(cls, path: str | Path) -> "RunSummary":
        data = json.loads(Path(path).read_text())
        data["mean_delta"] = {int(k): v for k, v in data.get("mean_delta", {}).items()}
        return cls(**data)

    def _as_json(self) -> str:
        payload = asdict(self)
        payload["mean_delta"] = {str(k): v for k, v in self.mean_delta.items()}
        return json.dumps(payload, indent=2)

    def _as_markdown(self) -> str:
        lines = ["# slotshare Run Summary", ""]
        lines.append(f"Scenario: {self.scenario} (baseline: {self.baseline}, seed {self.seed})")
        lines.append(f"Users: {self.n_users}; busy slots: {self.busy_slots}")
        lines.append("\n## Throughput")
        lines.append(f"- long-term sum throughput: {self.sum_throughput:.6g}")
        lines.append(f"- weighted objective: {self.weighted_objective:.6g}")
        lines.append("\n## Collisions")
        lines.append(f"- transmissions: {self.transmissions}")
        lines.append(f"- collision rate: {self.collision_rate:.4f}")
        lines.append(f"- collision rate (second half): {self.late_collision_rate:.4f}")
        if self.mean_delta:
            lines.append("\n## Mean throughput loss by window")
            for window, delta in sorted(self.mean_delta.items()):
                lines.append(f"- T_w={window}: {delta:.6g}")
        return "\n".join(lines)

    def as_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[self.sum_throughput, self.weighted_objective, self.collision_rate, self.seed]],
            columns=SUMMARY_COLUMNS,
        )


@dataclass
class MetricsLog:
    """Tables of one run: per (slot, user), per user, per decision window, and the summary."""

    slots: pd.DataFrame
    users: pd.DataFrame
    decisions: pd.DataFrame
    summary: pd.DataFrame
