from fastapi import HTTPException

from app.errors import (
    KnowledgeBaseConsistencyError,
    KnowledgeBaseParseError,
    KnowledgeBaseReferenceError,
    KnowledgeBaseValidationError,
    PlannerError,
)

KNOWLEDGE_BASE_ERRORS = (
    KnowledgeBaseParseError,
    KnowledgeBaseReferenceError,
    KnowledgeBaseValidationError,
    KnowledgeBaseConsistencyError,
)


def to_http_exception(error: PlannerError) -> HTTPException:
    """422 for a bad knowledge base, 409 when planning or scheduling cannot succeed."""
    status_code = 422 if isinstance(error, KNOWLEDGE_BASE_ERRORS) else 409
    return HTTPException(status_code=status_code, detail=error.to_dict())
