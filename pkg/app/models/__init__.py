from app.models.knowledge_base import (
    ActionTransition,
    Condition,
    Feature,
    KnowledgeBase,
    StateVector,
    TemporalTransition,
    TransitionSet,
)
from app.models.plan import Edge, Frontier, PlanGraph, PlannedState, StateClass, StateStatus
from app.models.schedule import Tap, TapKind, TapSchedule
from app.models.simulation import SimReport, TrialOutcome, TrialResult

__all__ = [
    "ActionTransition",
    "Condition",
    "Feature",
    "KnowledgeBase",
    "StateVector",
    "TemporalTransition",
    "TransitionSet",
    "Edge",
    "Frontier",
    "PlanGraph",
    "PlannedState",
    "StateClass",
    "StateStatus",
    "Tap",
    "TapKind",
    "TapSchedule",
    "SimReport",
    "TrialOutcome",
    "TrialResult",
]
