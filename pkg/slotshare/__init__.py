"""slotshare package public API."""

from .config import ExperimentConfig, load_config
from .core import Simulation, run_experiment
from .env import Feedback, FeedbackSignal, SlotOutcome, resolve_slot
from .io import emit_metrics, load_metrics
from .learner import Agent
from .neuralnet import BranchingDuelingNet
from .report import MetricsLog, RunSummary
from . import scenarios, exceptions

__all__ = [
    "ExperimentConfig",
    "load_config",
    "Simulation",
    "run_experiment",
    "Feedback",
    "FeedbackSignal",
    "SlotOutcome",
    "resolve_slot",
    "emit_metrics",
    "load_metrics",
    "Agent",
    "BranchingDuelingNet",
    "MetricsLog",
    "RunSummary",
    "scenarios",
    "exceptions",
]
