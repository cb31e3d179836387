"""
Pydantic schemas for API request/response validation.
"""

from typing import Any, Dict, List, Optional, Union
from pydantic import BaseModel, Field
from enum import Enum


class DriftEnum(str, Enum):
    """Sign of the drift term."""
    down = "down"
    up = "up"


class SideEnum(str, Enum):
    """Half-lines that carry innovation mass."""
    positive = "positive"
    negative = "negative"
    two_sided = "two-sided"


class ProfileEnum(str, Enum):
    constant = "constant"
    oscillating = "oscillating"


class ConditionEnum(str, Enum):
    recurrence = "T2_1_RECURRENCE"
    transience = "T2_1_TRANSIENCE"
    moment_upper = "T2_2_MOMENT_UPPER"
    moment_lower = "T2_2_MOMENT_LOWER"


class ModelPayload(BaseModel):
    """Chain model x -> (x -+ x^gamma + alpha)^+."""
    drift: DriftEnum = Field(default=DriftEnum.down, description="down: x - x^gamma, up: x + x^gamma")
    gamma: float = Field(..., gt=0.0, lt=1.0, description="Drift exponent", examples=[0.5])
    target_a: float = Field(default=2.0, ge=0.0, description="Target set A = [0, a]")


class InnovationPayload(BaseModel):
    """Heavy-tailed innovation law; unset tail constants default to theta*y0^theta/2 (/4 per side when two-sided)."""
    side: SideEnum = Field(default=SideEnum.positive)
    theta_right: Optional[float] = Field(default=None, gt=0.0, lt=1.0, examples=[0.7])
    theta_left: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    c_right: Optional[float] = Field(default=None, gt=0.0)
    c_left: Optional[float] = Field(default=None, gt=0.0)
    y0: float = Field(default=1.0, gt=0.0)
    c_profile: ProfileEnum = Field(default=ProfileEnum.constant)
    amplitude: float = Field(default=0.0, ge=0.0, lt=1.0)


class ClassifyRequest(BaseModel):
    """Request body for classification."""
    model: ModelPayload
    innovation: InnovationPayload


class ClassifyResponse(BaseModel):
    """Regime, moment threshold and deciding clause."""
    regime: str
    q_star: Union[float, str]
    delta0: Optional[float] = None
    clause: str
    sharp: bool
    boundary_moment_known: bool


class ConstantsRequest(BaseModel):
    """Request body for K, L and the critical roots."""
    theta: float = Field(..., gt=0.0, lt=1.0, examples=[0.5])
    delta: float = Field(default=0.0, examples=[0.0])
    c: Optional[float] = Field(default=None, gt=0.0, description="Tail constant for the delta0 roots")


class ConstantsResponse(BaseModel):
    """K(delta, theta), L(delta, theta) and delta0 roots; null outside their domains."""
    theta: float
    delta: float
    K: Optional[float] = None
    L: Optional[float] = None
    delta0_k: Optional[float] = None
    delta0_l: Optional[float] = None


class DriftRequest(BaseModel):
    """Request body for a grid drift check."""
    model: ModelPayload
    innovation: InnovationPayload
    delta: Optional[float] = Field(default=None, description="Lyapunov exponent; null uses the proof recipe")
    condition: Optional[ConditionEnum] = Field(default=None, description="Criterion; null uses the proof recipe")
    p: float = Field(default=1.0, gt=0.0)
    grid: List[float] = Field(
        ...,
        min_length=1,
        max_length=200,
        description="Strictly increasing evaluation points outside A",
        examples=[[100.0, 1000.0, 10000.0]],
    )


class DriftResponse(BaseModel):
    """Summary of a drift report."""
    holds: bool
    failures: int
    condition: Dict[str, Any]
    lyapunov: Dict[str, Any]
    witness: Dict[str, Any]
    dg_values: List[float]
    note: str


class HealthResponse(BaseModel):
    """Health check response."""
    status: str = Field(default="healthy")
    version: str


class ErrorResponse(BaseModel):
    """Standard error response."""
    error: str
    detail: Optional[str] = None
    status_code: int
