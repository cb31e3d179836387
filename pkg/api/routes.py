"""
API route handlers for classification, constants and drift checks.
"""

from typing import Optional
import logging

from fastapi import APIRouter, HTTPException

import sys
sys.path.insert(0, '..')

from src import __version__
from src.chain import ModelSpec
from src.classify import lyapunov_recipe, classify
from src.dist import InnovationSpec
from src.drift import Condition, LyapunovSpec, check_condition
from src.errors import DomainError, NumericalError
from src.specialfn import delta0_k, delta0_l, k_const, l_const

from .schemas import (
    ClassifyRequest, ClassifyResponse,
    ConstantsRequest, ConstantsResponse,
    DriftRequest, DriftResponse,
    HealthResponse, ErrorResponse,
    ModelPayload, InnovationPayload,
)

logger = logging.getLogger(__name__)

router = APIRouter()


def _model(payload: ModelPayload) -> ModelSpec:
    return ModelSpec(drift=payload.drift.value, gamma=payload.gamma, target_a=payload.target_a)


def _innovation(payload: InnovationPayload) -> InnovationSpec:
    data = payload.model_dump()
    data["side"] = payload.side.value
    data["c_profile"] = payload.c_profile.value
    return InnovationSpec(**data)


def _optional(fn, *args) -> Optional[float]:
    try:
        value = fn(*args)
    except DomainError:
        return None
    return getattr(value, "delta0", value)


@router.post(
    "/classify",
    response_model=ClassifyResponse,
    responses={400: {"model": ErrorResponse}},
    summary="Classify a parameter point",
    description="Return the regime, moment threshold and deciding clause for a model and innovation law."
)
def classify_point(request: ClassifyRequest) -> ClassifyResponse:
    """Classify one (model, innovation) pair."""
    try:
        verdict = classify(_model(request.model), _innovation(request.innovation))
    except DomainError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return ClassifyResponse(**verdict.to_dict())


@router.post(
    "/constants",
    response_model=ConstantsResponse,
    summary="Special constants",
    description="K and L at (delta, theta); the delta0 roots when c is given."
)
def constants(request: ConstantsRequest) -> ConstantsResponse:
    """Evaluate K, L and, with c, the critical roots."""
    try:
        response = ConstantsResponse(
            theta=request.theta,
            delta=request.delta,
            K=_optional(k_const, request.delta, request.theta),
            L=_optional(l_const, request.delta, request.theta),
        )
        if request.c is not None:
            response.delta0_k = _optional(delta0_k, request.c, request.theta)
            response.delta0_l = _optional(delta0_l, request.c, request.theta)
    except NumericalError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return response


@router.post(
    "/drift",
    response_model=DriftResponse,
    responses={400: {"model": ErrorResponse}, 422: {"model": ErrorResponse}},
    summary="Check a drift criterion",
    description="Evaluate Dg on a small grid (at most 200 points) and report the verdict."
)
def drift_check(request: DriftRequest) -> DriftResponse:
    """Grid certificate of a drift criterion."""
    try:
        model = _model(request.model)
        dist = _innovation(request.innovation)
        recipe = None
        if request.delta is None or request.condition is None:
            recipe = lyapunov_recipe(model, dist)
        lyap = LyapunovSpec(request.delta, request.delta < 0) if request.delta is not None else recipe.lyapunov
        condition = Condition(request.condition.value, p=request.p) if request.condition else recipe.condition
        report = check_condition(model, dist, lyap, condition, request.grid)
    except DomainError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except NumericalError as e:
        raise HTTPException(status_code=422, detail=str(e))

    summary = report.to_dict()
    return DriftResponse(
        holds=summary["holds"],
        failures=summary["failures"],
        condition=summary["condition"],
        lyapunov=summary["lyapunov"],
        witness=summary["witness"],
        dg_values=report.dg_values,
        note=report.note,
    )


@router.get(
    "/health",
    response_model=HealthResponse,
    summary="Health check",
    description="Check that the API is running."
)
async def health_check() -> HealthResponse:
    """Check API health."""
    return HealthResponse(status="healthy", version=__version__)
