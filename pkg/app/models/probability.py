from dataclasses import dataclass
from enum import Enum
from typing import Optional

from app.models.knowledge_base import StateVector


class ActionKind(str, Enum):
    PREEMPTIVE = "preemptive"
    NONPREEMPTIVE = "nonpreemptive"
    NONE = "none"


class TransitionKind(str, Enum):
    ACTION = "action"
    TEMPORAL = "temporal"


@dataclass(frozen=True)
class CriticalTimeContext:
    """Plan-so-far timing used by the non-preemptive average-delay estimate.

    a: summed feature-test WCETs, n: number of planned actions,
    b: summed action WCETs, t_delay: the candidate action's delay.
    """

    a: float
    n: int
    b: float
    t_delay: float


@dataclass(frozen=True)
class OffspringContribution:
    target: Optional[StateVector]
    via: str
    kind: TransitionKind
    fraction: float
    mass: float
    is_failure: bool = False
