"""
Health Check Routes.

API endpoints for service health monitoring. Readiness solves a two-variable
LP with the embedded engine, so a broken numerics install fails the check.
"""
import logging
import math
from datetime import datetime, timezone

from fastapi import APIRouter
from fastapi.concurrency import run_in_threadpool

from app.core.config import settings
from app.milp.model import MilpModel, Sense, SolveStatus
from app.solver.simplex import solve_lp

logger = logging.getLogger(__name__)

router = APIRouter(tags=["Health"])

CHECK_OBJECTIVE = -2.8


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _check_model() -> MilpModel:
    # min -x - y  s.t.  x + 2y <= 4,  3x + y <= 6;  optimum at (1.6, 1.2)
    model = MilpModel("readiness")
    x = model.add_variable("x", 0.0, math.inf)
    y = model.add_variable("y", 0.0, math.inf)
    model.add_constraint([(x, 1.0), (y, 2.0)], Sense.LE, 4.0)
    model.add_constraint([(x, 3.0), (y, 1.0)], Sense.LE, 6.0)
    model.set_objective([(x, -1.0), (y, -1.0)])
    return model.freeze()


def solver_check() -> bool:
    try:
        result = solve_lp(_check_model())
    except Exception as e:
        logger.error(f"Solver check failed: {str(e)}")
        return False
    return result.status == SolveStatus.OPTIMAL and abs(result.objective - CHECK_OBJECTIVE) < 1e-6


@router.get("/health")
async def health_check():
    """
    Basic health check endpoint.

    Returns service status and version information.
    """
    return {
        "status": "healthy",
        "service": settings.SERVICE_NAME,
        "version": settings.SERVICE_VERSION,
        "environment": settings.ENV,
        "timestamp": _now(),
    }


@router.get("/health/ready")
async def readiness_check():
    """
    Readiness check endpoint.

    Verifies the embedded LP engine and reports the fit limits.
    """
    checks = {"lp_engine": await run_in_threadpool(solver_check)}
    return {
        "status": "ready" if all(checks.values()) else "not_ready",
        "checks": checks,
        "limits": {
            "max_fit_rows": settings.MAX_FIT_ROWS,
            "node_limit": settings.DEFAULT_NODE_LIMIT,
            "time_limit_s": settings.DEFAULT_TIME_LIMIT_S,
        },
        "timestamp": _now(),
    }


@router.get("/health/live")
async def liveness_check():
    """Simple check to verify the service is running."""
    return {
        "status": "alive",
        "timestamp": _now(),
    }
