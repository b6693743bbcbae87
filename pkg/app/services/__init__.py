from app.services.knowledge_base_service import KnowledgeBaseService
from app.services.probability_service import ProbabilityService
from app.services.planner_service import PlannerService
from app.services.scheduler_service import SchedulerService
from app.services.simulator_service import SimulatorService
from app.services.export_service import ExportService

__all__ = [
    "KnowledgeBaseService",
    "ProbabilityService",
    "PlannerService",
    "SchedulerService",
    "SimulatorService",
    "ExportService",
]
