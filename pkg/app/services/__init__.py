"""
Services Package.

Business logic between the CLI/API surfaces and the learning core.

Services:
- FitService: MILP fit with greedy warm start and structural checks
- ExperimentService: case-study comparison experiments and CSV series
- metrics: test, rollout and coefficient errors
"""
from app.services.fit_service import FitResult, FitService, fit_service
from app.services.experiment_service import EXPERIMENTS, ExperimentResult, ExperimentService

__all__ = [
    "FitResult",
    "FitService",
    "fit_service",
    "EXPERIMENTS",
    "ExperimentResult",
    "ExperimentService",
]
