from fastapi import APIRouter

from app.errors import PlannerError
from app.routers.errors import to_http_exception
from app.schemas.planner import PlannerConfig
from app.schemas.reports import SimulationReport, SimulationRequest
from app.services.export_service import ExportService
from app.services.knowledge_base_service import KnowledgeBaseService
from app.services.scheduler_service import SchedulerService
from app.services.simulator_service import SimulatorService

router = APIRouter(prefix="/simulations", tags=["simulations"])


@router.post("", response_model=SimulationReport)
def run_simulation(request: SimulationRequest):
    """
    Monte Carlo validation of the scheduled plan.

    - **trials**: number of independent trials (default: 1000, max: 100000)
    - **seed**: root seed; identical requests give identical reports
    - **horizon**: simulated time limit per trial (default: derived from tap periods)
    """
    try:
        kb = KnowledgeBaseService.load_knowledge_base(request.knowledge_base)
        graph, schedule = SchedulerService.plan_and_schedule(kb, request.config or PlannerConfig.from_settings())
        report = SimulatorService.estimate(
            graph,
            schedule,
            kb,
            n_trials=request.trials,
            horizon=request.horizon,
            seed=request.seed,
            fires_per_cycle=request.fires_per_cycle,
        )
    except PlannerError as e:
        raise to_http_exception(e)
    return ExportService.simulation_report(report, kb)
