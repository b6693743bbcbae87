from typing import Any, Dict, List, Optional


class PlannerError(Exception):
    """Base class for every error raised by the planning stack."""

    code = "planner_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "message": self.message, **self.details}


class KnowledgeBaseParseError(PlannerError):
    code = "parse_error"


class KnowledgeBaseReferenceError(PlannerError):
    code = "reference_error"


class KnowledgeBaseValidationError(PlannerError):
    code = "validation_error"

    def __init__(self, violations: List[Dict[str, Any]]):
        super().__init__(
            f"knowledge base has {len(violations)} violation(s)",
            violations=violations,
        )
        self.violations = violations


class KnowledgeBaseConsistencyError(PlannerError):
    code = "consistency_error"


class ProbabilityError(PlannerError):
    code = "probability_error"


class EmptyFrontierError(PlannerError):
    code = "empty_frontier"


class UnguardableStateError(PlannerError):
    code = "unguardable_state"

    def __init__(self, message: str, states: Optional[List[Dict[str, str]]] = None, **details: Any):
        super().__init__(message, states=states or [], **details)
        self.states = states or []


class PlanningFailure(PlannerError):
    code = "planning_failure"


class SchedulingFailure(PlannerError):
    code = "scheduling_failure"


class ModelIncompletenessError(PlannerError):
    code = "model_incomplete"
