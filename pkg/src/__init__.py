"""
Heavytail - Core Module
Recurrence, transience and passage-time moments of Markov chains with a
sublinear drift and heavy-tailed innovations.
"""

from .chain import Drift, ModelSpec, passage_time, simulate
from .classify import Classification, Regime, classify, lyapunov_recipe
from .dist import CProfile, InnovationSpec, PointMass, Side
from .drift import Condition, ConditionKind, LyapunovSpec, check_condition, drift_quadrature
from .montecarlo import McSummary, run_campaign

__version__ = "1.0.0"
__all__ = [
    "Drift", "ModelSpec", "passage_time", "simulate",
    "Classification", "Regime", "classify", "lyapunov_recipe",
    "CProfile", "InnovationSpec", "PointMass", "Side",
    "Condition", "ConditionKind", "LyapunovSpec", "check_condition", "drift_quadrature",
    "McSummary", "run_campaign",
]
