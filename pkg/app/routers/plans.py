from fastapi import APIRouter, Response

from app.errors import PlannerError
from app.routers.errors import to_http_exception
from app.schemas.planner import PlannerConfig
from app.schemas.reports import PlanRequest, PlanResponse
from app.services.export_service import ExportService
from app.services.knowledge_base_service import KnowledgeBaseService
from app.services.scheduler_service import SchedulerService

router = APIRouter(prefix="/plans", tags=["plans"])


def _plan_and_schedule(request: PlanRequest):
    try:
        kb = KnowledgeBaseService.load_knowledge_base(request.knowledge_base)
        cfg = request.config or PlannerConfig.from_settings()
        graph, schedule = SchedulerService.plan_and_schedule(kb, cfg)
    except PlannerError as e:
        raise to_http_exception(e)
    return kb, graph, schedule


@router.post("", response_model=PlanResponse)
def create_plan(request: PlanRequest):
    """
    Plan, derive test-action pairs and check schedulability.

    - **knowledge_base**: knowledge-base document
    - **config**: planner settings (default: server settings)

    P1 is raised automatically until the schedule is feasible; a plan
    that cannot be scheduled without cutting the goal path returns 409.
    """
    kb, graph, schedule = _plan_and_schedule(request)
    return PlanResponse(
        plan=ExportService.plan_report(graph),
        schedule=ExportService.schedule_report(schedule, kb),
    )


@router.post("/dot")
def export_plan_dot(request: PlanRequest):
    """State graph of the scheduled plan in Graphviz DOT."""
    _, graph, _ = _plan_and_schedule(request)
    return Response(content=ExportService.to_dot(graph), media_type="text/vnd.graphviz")
