"""Probabilistic planner with test-action-pair scheduling."""

__version__ = "1.0.0"

__all__ = [
    "main",
    "cli",
    "config",
    "errors",
]
