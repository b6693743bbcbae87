from app.routers.knowledge_bases import router as knowledge_bases_router
from app.routers.plans import router as plans_router
from app.routers.simulations import router as simulations_router

__all__ = ["knowledge_bases_router", "plans_router", "simulations_router"]
