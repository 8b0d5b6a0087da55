"""Slot-synchronous multichannel medium."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Mapping, Tuple

import numpy as np

from .exceptions import ConfigError, InvalidChoiceError

IDLE = 0


class FeedbackSignal(str, Enum):
    """Per-RB feedback broadcast by the access point."""

    ACK = "ACK"
    NAK = "NAK"


@dataclass(frozen=True)
class Feedback:
    """ACK/NAK vector over the N resource blocks of one slot."""

    per_rb: Tuple[FeedbackSignal, ...]

    @property
    def n_rbs(self) -> int:
        return len(self.per_rb)

    def is_ack(self, rb: int) -> bool:
        """Feedback of RB ``rb`` (1-based)."""
        return self.per_rb[rb - 1] is FeedbackSignal.ACK

    def acks(self) -> np.ndarray:
        return np.array([s is FeedbackSignal.ACK for s in self.per_rb], dtype=bool)


@dataclass(frozen=True)
class SlotOutcome:
    """Resolution of one slot: broadcast feedback plus per-user success."""

    feedback: Feedback
    success: Dict[int, int]
    collisions: int

    @property
    def successes(self) -> int:
        return sum(self.success.values())


def resolve_slot(choices: Mapping[int, int], n_rbs: int) -> SlotOutcome:
    """Resolve the transmissions of one slot into feedback and success indicators.

    ``choices`` maps user id to 0 (idle) or an RB in [1:n_rbs]. An RB is
    acknowledged iff exactly one user transmitted on it.
    """

    if n_rbs < 1:
        raise ConfigError(f"n_rbs must be positive, got {n_rbs}")
    counts = np.zeros(n_rbs + 1, dtype=np.int64)
    for user_id, value in choices.items():
        value = int(value)
        if value < IDLE or value > n_rbs:
            raise InvalidChoiceError(user_id, value, n_rbs)
        counts[value] += 1

    per_rb = tuple(
        FeedbackSignal.ACK if counts[rb] == 1 else FeedbackSignal.NAK for rb in range(1, n_rbs + 1)
    )
    success = {
        user_id: int(value != IDLE and counts[value] == 1) for user_id, value in choices.items()
    }
    collisions = int(np.count_nonzero(counts[1:] >= 2))
    return SlotOutcome(
        feedback=Feedback(per_rb=per_rb),
        success=success,
        collisions=collisions,
    )


def broadcast_feedback(outcome: SlotOutcome) -> Feedback:
    """Feedback as observed by every user; all users see the same vector."""
    return outcome.feedback
