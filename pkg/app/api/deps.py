"""
API Dependencies.

Provides dependency injection for API routes.
"""
from app.services.fit_service import FitService, fit_service


def get_fit_service() -> FitService:
    """Get the FitService singleton."""
    return fit_service


__all__ = [
    "get_fit_service",
]
