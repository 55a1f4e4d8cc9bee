"""Loss reserving with Tweedie GLMs and hierarchical GLMs, with bootstrap prediction error."""

from .bootstrap import (
    BootstrapConfig,
    BootstrapResult,
    bootstrap_run,
    error_quantiles,
    rmsep,
)
from .errors import (
    BaseFitError,
    DegenerateTriangle,
    DomainError,
    DuplicateCell,
    FutureCellPresent,
    IncompleteTriangle,
    KindMismatch,
    NoConvergence,
    ParseError,
    ReservingError,
    SingularDesign,
    StaleFit,
    TooManyFailures,
)
from .glm import ConvergenceWarning, FitControls, GlmFit, build_design, fit_glm, glm_msep_analytic
from .hglm import HglmControls, HglmFit, HglmSpec, fit_hglm, random_effect_estimates
from .model import ModelSpec, fit_model
from .reserving import ReserveReport, predict_cell, reserve_report
from .triangle import CellIndex, Triangle, future_cells, parse_triangle, read_triangle, to_long_csv

__version__ = "0.1.0"

__all__ = [
    "BaseFitError",
    "BootstrapConfig",
    "BootstrapResult",
    "CellIndex",
    "ConvergenceWarning",
    "DegenerateTriangle",
    "DomainError",
    "DuplicateCell",
    "FitControls",
    "FutureCellPresent",
    "GlmFit",
    "HglmControls",
    "HglmFit",
    "HglmSpec",
    "IncompleteTriangle",
    "KindMismatch",
    "ModelSpec",
    "NoConvergence",
    "ParseError",
    "ReserveReport",
    "ReservingError",
    "SingularDesign",
    "StaleFit",
    "TooManyFailures",
    "Triangle",
    "bootstrap_run",
    "build_design",
    "error_quantiles",
    "fit_glm",
    "fit_hglm",
    "fit_model",
    "future_cells",
    "glm_msep_analytic",
    "parse_triangle",
    "predict_cell",
    "random_effect_estimates",
    "read_triangle",
    "reserve_report",
    "rmsep",
    "to_long_csv",
]
