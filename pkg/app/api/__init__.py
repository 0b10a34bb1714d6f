"""
API Package.

Contains all API-related modules including routes, dependencies, and routers.
"""
from app.api.routers import create_api_router, get_all_routers
from app.api.deps import get_fit_service

__all__ = [
    "create_api_router",
    "get_all_routers",
    "get_fit_service",
]
