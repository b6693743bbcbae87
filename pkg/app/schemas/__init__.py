from app.schemas.curve import DelayedExponentialCurve, PiecewiseCurve, TemporalCurve
from app.schemas.knowledge_base import KnowledgeBaseDocument
from app.schemas.planner import ExpansionOrder, PlannerConfig
from app.schemas.reports import (
    PlanReport,
    PlanRequest,
    PlanResponse,
    ScheduleReport,
    SimulationReport,
    SimulationRequest,
    ValidationResponse,
)

__all__ = [
    "DelayedExponentialCurve",
    "PiecewiseCurve",
    "TemporalCurve",
    "KnowledgeBaseDocument",
    "ExpansionOrder",
    "PlannerConfig",
    "PlanReport",
    "PlanRequest",
    "PlanResponse",
    "ScheduleReport",
    "SimulationReport",
    "SimulationRequest",
    "ValidationResponse",
]
