from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from app.schemas.knowledge_base import KnowledgeBaseDocument
from app.schemas.planner import PlannerConfig


class StateReport(BaseModel):
    state: Dict[str, str]
    failed: bool = False
    prob: float
    status: str
    state_class: str
    chosen_action: Optional[str] = None
    action_kind: str
    # null when no action was planned (infinite critical time) or the state was never expanded
    critical_time: Optional[float] = None
    discarded_mass: float = 0.0
    expansion_index: Optional[int] = None


class EdgeReport(BaseModel):
    source: Dict[str, str]
    target: Dict[str, str]
    target_failed: bool = False
    via: str
    kind: str
    fraction: float
    mass: float


class PlanReport(BaseModel):
    knowledge_base: str
    config: PlannerConfig
    p1: float
    p2: Optional[float] = None
    goal_found: bool
    goal_path: Optional[List[Dict[str, str]]] = None
    goal_path_prob: float
    expansions: int
    discarded_mass: float
    truncated: bool
    stats: Dict[str, int] = Field(default_factory=dict)
    states: List[StateReport] = Field(default_factory=list)
    edges: List[EdgeReport] = Field(default_factory=list)


class TapReport(BaseModel):
    name: str
    kind: str
    action: str
    test: Dict[str, str]
    test_wcet: float
    action_wcet: float
    t_delay: float
    deadline: Optional[float] = None
    period: Optional[float] = None
    guarded_states: List[Dict[str, str]]


class EscalationReport(BaseModel):
    p1: float
    removed: int


class ScheduleReport(BaseModel):
    taps: List[TapReport]
    utilization: float
    feasible: bool
    cycle_length: float
    escalations: List[EscalationReport] = Field(default_factory=list)


class FrequencyReport(BaseModel):
    count: int
    frequency: float
    low: float
    high: float
    half_width: float


class SimulationReport(BaseModel):
    knowledge_base: str
    trials: int
    aborted: int = 0
    seed: int
    horizon: float
    frequencies: Dict[str, FrequencyReport]
    planner_goal_prob: float
    mean_time_to_goal: Optional[float] = None
    mean_guarded_visits: float


class PlanResponse(BaseModel):
    plan: PlanReport
    schedule: ScheduleReport


class ValidationResponse(BaseModel):
    valid: bool
    violations: List[dict] = Field(default_factory=list)


class PlanRequest(BaseModel):
    knowledge_base: KnowledgeBaseDocument
    config: Optional[PlannerConfig] = None


class SimulationRequest(PlanRequest):
    trials: int = Field(default=1000, ge=1, le=100_000)
    seed: int = 0
    horizon: Optional[float] = Field(default=None, gt=0)
    fires_per_cycle: Optional[int] = Field(default=None, ge=1)
