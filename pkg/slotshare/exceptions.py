"""Custom exceptions for slotshare."""


class SlotShareError(Exception):
    """Base exception for slotshare errors."""


class InvalidChoiceError(SlotShareError):
    """Raised when a user's per-slot channel choice is outside [0:N]."""

    def __init__(self, user_id: int, value: int, n_rbs: int) -> None:
        super().__init__(f"User {user_id} chose RB {value}, expected a value in [0:{n_rbs}]")
        self.user_id = user_id
        self.value = value


class PopulationError(SlotShareError):
    """Raised when a population model is invalid."""


class HorizonError(PopulationError):
    """Raised when a slot beyond the materialized horizon is queried."""


class TraceError(PopulationError):
    """Raised when a mobility trace cannot be parsed or validated."""


class FairnessError(SlotShareError):
    """Raised for fairness metrics evaluated outside their domain."""


class ScheduleError(SlotShareError):
    """Raised when a decision window is inconsistent with the schedule."""


class EncodingError(SlotShareError):
    """Raised when an observation cannot be encoded into the network input."""


class ShapeError(SlotShareError):
    """Raised on tensor shape mismatches inside the network."""


class ChannelError(SlotShareError):
    """Raised when radio parameters are invalid."""


class TrajectoryError(ChannelError):
    """Raised when a user's position is unknown at a slot."""


class ConfigError(SlotShareError):
    """Raised when an experiment configuration fails validation."""


class NumericError(SlotShareError):
    """Raised when the simulation produces non-finite values."""
