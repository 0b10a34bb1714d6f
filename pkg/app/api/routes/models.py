"""
Model Routes.

API endpoints for fitting symbolic trees, predicting with a tree document
and exporting the fit MILP. Solves run in the threadpool so the event loop
stays responsive.
"""
import logging
import math
from typing import Any, Dict, List

import numpy as np
from fastapi import APIRouter, Depends, HTTPException
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import PlainTextResponse

from app.api.deps import get_fit_service
from app.core.config import settings
from app.core.exceptions import UserError
from app.learning.dataset import Dataset
from app.learning.tree import SymbolicTree
from app.schemas.api import FitRequest, FitResponse, ObjectiveBreakdown, PredictRequest, PredictResponse
from app.schemas.tree import TreeDocument
from app.services.fit_service import FitService
from app.symbolic.basis import BasisRole, BasisSet

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/models", tags=["Models"])


def _training_set(request: FitRequest):
    if not request.rows:
        raise HTTPException(status_code=400, detail="empty dataset")
    if len(request.rows) > settings.MAX_FIT_ROWS:
        raise HTTPException(
            status_code=413,
            detail=f"{len(request.rows)} rows exceed the limit of {settings.MAX_FIT_ROWS}",
        )
    data = Dataset.from_rows(request.rows, target=request.target)
    basis_branch = BasisSet.from_texts(request.basis_branch, data.feature_names, BasisRole.BRANCHING)
    basis_leaf = BasisSet.from_texts(request.basis_leaf, data.feature_names, BasisRole.LEAF)
    return data, basis_branch, basis_leaf


def _json_safe(stats: Dict[str, Any]) -> Dict[str, Any]:
    # JSON has no infinities; an unbounded gap or a missing incumbent becomes null
    return {k: None if isinstance(v, float) and not math.isfinite(v) else v for k, v in stats.items()}


def _columns(rows: List[Dict[str, float]], variables) -> Dict[str, np.ndarray]:
    columns = {}
    for name in variables:
        try:
            columns[name] = np.array([float(row[name]) for row in rows])
        except KeyError:
            raise UserError(f"rows are missing variable '{name}'") from None
    return columns


@router.post("/fit", response_model=FitResponse)
async def fit_model(
    request: FitRequest,
    fit_service: FitService = Depends(get_fit_service),
):
    """
    Learn a symbolic decision tree from the posted rows.

    **Request Body:**
    - `rows`: training samples as name -> value mappings
    - `target`: name of the target entry in each row
    - `basis_branch` / `basis_leaf`: basis expressions as text
    - `hyperparams`, `solver`: MILP and solver settings
    """
    try:
        data, basis_branch, basis_leaf = _training_set(request)
        result = await run_in_threadpool(
            fit_service.fit, data, basis_branch, basis_leaf,
            request.hyperparams, request.solver, request.warm_start,
        )
    except HTTPException:
        raise
    except UserError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception(f"Fit failed: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Fit failed: {str(e)}")

    response = FitResponse(
        status=result.status.value,
        stats=_json_safe(result.stats.as_dict()),
        model_size=result.model_size,
        invariants=result.invariants_ok,
    )
    if result.tree is not None:
        terms = result.solution.terms
        response.tree = TreeDocument.model_validate(result.tree.serialize())
        response.equation = result.equation
        response.objective = result.solution.objective
        response.terms = ObjectiveBreakdown(l_acc=terms.l_acc, l_c=terms.l_c, l_m=terms.l_m)
    return response


@router.post("/predict", response_model=PredictResponse)
async def predict(request: PredictRequest):
    """Evaluate a tree document on rows; returns predictions and reached leaf ids."""
    try:
        tree = SymbolicTree.deserialize(request.tree.model_dump())
        if not request.rows:
            raise UserError("empty dataset")
        columns = _columns(request.rows, tree.variables)
        predictions = tree.predict_many(columns)
        leaves = tree.predict_leaves_many(columns)
    except UserError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return PredictResponse(
        predictions=[float(v) for v in predictions],
        leaves=[int(n) for n in leaves],
    )


@router.post("/mps", response_class=PlainTextResponse)
async def export_mps(
    request: FitRequest,
    fit_service: FitService = Depends(get_fit_service),
):
    """MPS text of the fit MILP for the posted rows, for external solvers."""
    try:
        data, basis_branch, basis_leaf = _training_set(request)
        text = await run_in_threadpool(fit_service.export_mps, data, basis_branch, basis_leaf, request.hyperparams)
    except HTTPException:
        raise
    except UserError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception(f"MPS export failed: {str(e)}")
        raise HTTPException(status_code=500, detail=f"MPS export failed: {str(e)}")
    return PlainTextResponse(text)
