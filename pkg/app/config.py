import logging
from functools import lru_cache
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Planning
    EPSILON: float = 0.01
    INITIAL_P1: float = 0.0
    MAX_EXPANSIONS: int = 100_000
    EXPANSION_ORDER: str = "probabilistic"
    GOAL_WEIGHT: float = 1.0
    TTF_PENALTY: float = 0.5

    # Knowledge-base validation
    ENUMERATION_LIMIT: int = 10**6
    PROB_TOLERANCE: float = 1e-9

    # Simulation
    SIM_TRIALS: int = 10_000
    SIM_SEED: int = 0
    SIM_HORIZON: Optional[float] = None
    HORIZON_PERIODS: float = 50.0
    FALLBACK_HORIZON: float = 1000.0
    BEST_EFFORT_FIRES_PER_CYCLE: int = 1

    LOG_LEVEL: str = "WARNING"

    # CORS settings
    CORS_ORIGINS: list[str] = ["http://localhost:3000", "http://localhost:8000"]

    class Config:
        env_file = ".env"
        env_prefix = "PLANNER_"
        case_sensitive = True


@lru_cache()
def get_settings():
    return Settings()


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """Attach one stream handler to the package logger (idempotent)."""
    logger = logging.getLogger("app")
    logger.setLevel((level or get_settings().LOG_LEVEL).upper())
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
