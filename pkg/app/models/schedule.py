from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Optional, Tuple

from app.models.knowledge_base import ActionTransition, Condition, StateVector


class TapKind(str, Enum):
    GUARANTEED = "guaranteed"
    BEST_EFFORT = "best_effort"


@dataclass(frozen=True)
class Tap:
    """Test-action pair: test the guarded states' common clauses, then run the action."""

    name: str
    test: Condition
    action: ActionTransition
    kind: TapKind
    deadline: Optional[float]
    period: Optional[float]
    guarded_states: FrozenSet[StateVector]

    @property
    def test_wcet(self) -> float:
        return self.action.test_wcet

    @property
    def action_wcet(self) -> float:
        return self.action.action_wcet

    @property
    def wcet(self) -> float:
        return self.action.test_wcet + self.action.action_wcet

    @property
    def utilization(self) -> float:
        if self.kind is not TapKind.GUARANTEED:
            return 0.0
        return self.wcet / self.period

    def guards(self, vector: StateVector) -> bool:
        return vector in self.guarded_states


@dataclass(frozen=True)
class Escalation:
    p1: float
    removed: int


@dataclass(frozen=True)
class TapSchedule:
    taps: Tuple[Tap, ...]
    utilization: float
    feasible: bool
    escalations: Tuple[Escalation, ...] = ()

    @property
    def guaranteed(self) -> Tuple[Tap, ...]:
        return tuple(t for t in self.taps if t.kind is TapKind.GUARANTEED)

    @property
    def best_effort(self) -> Tuple[Tap, ...]:
        return tuple(t for t in self.taps if t.kind is TapKind.BEST_EFFORT)

    @property
    def cycle_length(self) -> float:
        """Longest guaranteed period, or the summed WCETs when nothing is guaranteed."""
        periods = [t.period for t in self.guaranteed]
        if periods:
            return max(periods)
        return sum(t.wcet for t in self.taps)

    def taps_for(self, vector: StateVector) -> Tuple[Tap, ...]:
        return tuple(t for t in self.taps if t.guards(vector))

    def without(self, name: str) -> "TapSchedule":
        """Copy with the named tap dropped; utilization and verdict recomputed."""
        taps = tuple(t for t in self.taps if t.name != name)
        utilization = sum(t.utilization for t in taps)
        return TapSchedule(taps, utilization, utilization <= 1.0, self.escalations)
