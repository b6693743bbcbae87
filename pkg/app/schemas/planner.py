from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.config import Settings, get_settings


class ExpansionOrder(str, Enum):
    PROBABILISTIC = "probabilistic"
    DEPTH_FIRST = "depth_first"


class PlannerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    epsilon: float = Field(default=0.01, gt=0.0, lt=1.0)
    initial_p1: float = Field(default=0.0, ge=0.0, lt=1.0)
    max_expansions: int = Field(default=100_000, ge=1)
    goal_weight: float = 1.0
    ttf_penalty: float = 0.5
    order: ExpansionOrder = ExpansionOrder.PROBABILISTIC
    order_seed: Optional[int] = Field(
        default=None, description="Shuffles depth-first push order; ignored in probabilistic mode"
    )

    @classmethod
    def from_settings(cls, settings: Optional[Settings] = None, **overrides: Any) -> "PlannerConfig":
        settings = settings or get_settings()
        values: Dict[str, Any] = {
            "epsilon": settings.EPSILON,
            "initial_p1": settings.INITIAL_P1,
            "max_expansions": settings.MAX_EXPANSIONS,
            "goal_weight": settings.GOAL_WEIGHT,
            "ttf_penalty": settings.TTF_PENALTY,
            "order": settings.EXPANSION_ORDER,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
