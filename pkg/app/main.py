"""
Symbolic Tree Service - Main Application.

HTTP surface for learning symbolic decision trees by exact MILP: fit a tree
on posted rows, predict with a tree document, export the MILP as MPS.
"""
import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from app.api.routers import get_all_routers
from app.core.config import settings
from app.core.logging_setup import configure_logging

configure_logging(settings.DEBUG)
log = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Application lifespan handler.

    Logs the configuration on startup; there are no external resources.
    """
    log.info("=" * 60)
    log.info(f"Starting {settings.SERVICE_NAME} v{settings.SERVICE_VERSION}")
    log.info("=" * 60)
    log.info(f"Environment: {settings.ENV}")
    log.info(f"Fit row limit: {settings.MAX_FIT_ROWS}")
    log.info(f"Default node limit: {settings.DEFAULT_NODE_LIMIT}")
    if settings.DEFAULT_TIME_LIMIT_S is not None:
        log.info(f"Default time limit: {settings.DEFAULT_TIME_LIMIT_S}s")
    log.info("Service is ready to accept requests")

    yield

    log.info("Shutdown complete")


# =============================================================================
# APPLICATION FACTORY
# =============================================================================

def create_app() -> FastAPI:
    """
    Application factory.

    Creates and configures the FastAPI application.

    Returns:
        Configured FastAPI instance
    """
    app = FastAPI(
        title="Symbolic Tree Service",
        description="""
## Symbolic decision trees learned by mixed-integer programming

Each split is a sparse linear combination of basis functions of the inputs,
each leaf a linear combination of basis functions, all chosen jointly by an
exact MILP.

### Key Endpoints

- `POST /api/v1/models/fit` - Learn a tree from rows
- `POST /api/v1/models/predict` - Evaluate a tree document
- `POST /api/v1/models/mps` - Export the fit MILP in MPS format
        """,
        version=settings.SERVICE_VERSION,
        lifespan=lifespan,
        docs_url="/docs",
        redoc_url="/redoc",
    )

    api_router, health_router = get_all_routers()
    app.include_router(api_router)
    app.include_router(health_router)

    @app.get("/", tags=["Root"])
    async def root():
        """Root endpoint with service information."""
        return {
            "service": settings.SERVICE_NAME,
            "version": settings.SERVICE_VERSION,
            "status": "running",
            "environment": settings.ENV,
            "docs": "/docs",
        }

    return app


# Create the application instance
app = create_app()
