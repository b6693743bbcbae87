from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.config import configure_logging, get_settings
from app.routers import knowledge_bases_router, plans_router, simulations_router

settings = get_settings()
configure_logging(settings.LOG_LEVEL)

app = FastAPI(
    title="Probabilistic TAP Planner",
    description="Plan, schedule and simulate guarded test-action pairs for time-dependent world models",
    version=__version__,
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(knowledge_bases_router)
app.include_router(plans_router)
app.include_router(simulations_router)


@app.get("/")
def read_root():
    return {"message": "Probabilistic TAP Planner API", "version": __version__}


@app.get("/health")
def health_check():
    return {"status": "healthy"}
