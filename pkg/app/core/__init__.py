"""
Core Package.

Contains service settings, the exception hierarchy and logging setup.
"""
from app.core.config import settings
from app.core.logging_setup import configure_logging

__all__ = [
    "settings",
    "configure_logging",
]
