"""Handball match prediction with CMP team strengths as learner covariates."""

from .cmp import CmpParams, FitConfig, FitResult, fit_mle, log_normalizer, pmf
from .errors import HandselError
from .strength import StrengthProvider, TeamStrength, attack_strength, defense_strength, strengths_asof

__version__ = "0.1.0"

__all__ = [
    "CmpParams",
    "FitConfig",
    "FitResult",
    "HandselError",
    "StrengthProvider",
    "TeamStrength",
    "attack_strength",
    "defense_strength",
    "fit_mle",
    "log_normalizer",
    "pmf",
    "strengths_asof",
]
