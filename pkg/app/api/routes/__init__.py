"""
Routes Package.

Contains all API route modules.
"""
from app.api.routes.health import router as health_router
from app.api.routes.models import router as models_router

__all__ = [
    "health_router",
    "models_router",
]
