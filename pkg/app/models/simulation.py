from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

from app.models.knowledge_base import StateVector


class TrialResult(str, Enum):
    GOAL = "goal"
    FAILURE = "failure"
    DEADEND_STUCK = "deadend_stuck"
    REMOVED_DETECTED = "removed_detected"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class TraceStep:
    time: float
    state: StateVector
    # None for the entry into the initial state.
    transition: Optional[str]


@dataclass(frozen=True)
class TrialOutcome:
    result: TrialResult
    elapsed: float
    trace: Tuple[TraceStep, ...]
    guarded_visits: int = 0


@dataclass(frozen=True)
class ResultFrequency:
    count: int
    frequency: float
    low: float
    high: float

    @property
    def half_width(self) -> float:
        return (self.high - self.low) / 2


@dataclass(frozen=True)
class SimReport:
    trials: int
    seed: int
    horizon: float
    frequencies: Dict[TrialResult, ResultFrequency]
    planner_goal_prob: float
    mean_time_to_goal: Optional[float]
    mean_guarded_visits: float
    aborted: int = 0
    outcomes: Tuple[TrialOutcome, ...] = field(default=(), repr=False, compare=False)

    def frequency(self, result: TrialResult) -> float:
        return self.frequencies[result].frequency
