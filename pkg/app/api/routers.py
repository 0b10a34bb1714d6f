"""
API Router Configuration.

Aggregates all route modules into a single router.
"""
from fastapi import APIRouter

from app.api.routes import health_router, models_router
from app.core.config import settings


def create_api_router() -> APIRouter:
    """
    Create and configure the main API router.

    Returns:
        APIRouter with the model routes under settings.API_PREFIX
    """
    api_router = APIRouter(prefix=settings.API_PREFIX)
    api_router.include_router(models_router)
    return api_router


def get_all_routers():
    """
    Get all routers for the application.

    Returns:
        Tuple of (api_router, health_router)
    """
    return create_api_router(), health_router
