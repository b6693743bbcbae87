from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.schemas.curve import TemporalCurve


class FeatureSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1, max_length=100)
    values: List[str] = Field(..., min_length=2)


class ActionSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    pre: Dict[str, str] = Field(default_factory=dict)
    post: Dict[str, str] = Field(..., min_length=1)
    t_delay: float = Field(..., ge=0.0, allow_inf_nan=False)
    test_wcet: float = Field(..., ge=0.0, allow_inf_nan=False)
    action_wcet: float = Field(..., ge=0.0, allow_inf_nan=False)


class TemporalSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    post: Dict[str, str] = Field(..., min_length=1)
    curve: TemporalCurve
    is_failure: bool = False


class TransitionSetSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pre: Dict[str, str] = Field(default_factory=dict)
    members: List[TemporalSchema] = Field(default_factory=list)


class KnowledgeBaseDocument(BaseModel):
    """On-disk JSON layout of a knowledge base."""

    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    description: Optional[str] = None
    features: List[FeatureSchema] = Field(..., min_length=1)
    initial_states: List[Dict[str, str]] = Field(..., min_length=1)
    goal: Dict[str, str] = Field(default_factory=dict)
    actions: List[ActionSchema] = Field(default_factory=list)
    temporal_sets: List[TransitionSetSchema] = Field(default_factory=list)
