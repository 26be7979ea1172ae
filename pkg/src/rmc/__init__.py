"""Robust low-rank matrix completion with hybrid M-estimator losses."""

__version__ = "0.1.0"

from .estimators import (
    LossCoefficients,
    LossSpec,
    ParameterError,
    coefficients,
    dual_at_image,
    loss_derivative,
    loss_value,
    shrink,
    weight,
)
from .masked_linalg import (
    DegenerateDirectionError,
    FactorPair,
    ObservedMatrix,
    RankDeficiencyError,
)
from .solver import (
    SolveReport,
    SolverConfig,
    normalized_iqr,
    solve,
    solve_fnorm_baseline,
)
from .datagen import ExperimentSpec, make_trial, rmse
