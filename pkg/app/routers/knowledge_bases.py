from fastapi import APIRouter

from app.errors import PlannerError
from app.routers.errors import to_http_exception
from app.schemas.knowledge_base import KnowledgeBaseDocument
from app.schemas.reports import ValidationResponse
from app.services.knowledge_base_service import KnowledgeBaseService

router = APIRouter(prefix="/knowledge-bases", tags=["knowledge-bases"])


@router.post("/validate", response_model=ValidationResponse)
def validate_knowledge_base(document: KnowledgeBaseDocument):
    """
    Check a knowledge base without planning.

    - Unknown features or values are rejected with 422
    - Semantic problems (asymptote sums, malformed curves, overlapping
      temporal sets) are listed under **violations**
    """
    try:
        kb = KnowledgeBaseService.build(document)
    except PlannerError as e:
        raise to_http_exception(e)
    violations = KnowledgeBaseService.validate_knowledge_base(kb)
    return ValidationResponse(valid=not violations, violations=violations)
