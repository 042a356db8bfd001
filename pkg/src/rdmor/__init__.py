"""Reduced-order models (POD, DEIM and their corrected forms) for Turing-pattern reaction-diffusion systems."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DimensionError,
    DivergenceError,
    DomainError,
    NumericalError,
    RdmorError,
    SelectionError,
    SplitError,
)
from .kinetics import KineticsModel, ModelName, build_model, dib, fhn, schnakenberg  # noqa: E402
from .discretization import Grid, SpatialDiscretization, discretize, initial_condition  # noqa: E402
from .full_solver import FullRun, SnapshotSet, TimeGrid, compute_indicators, run_full  # noqa: E402
from .pod import GalerkinOperators, PodBasis, solve_pod  # noqa: E402
from .deim import DeimOperator, build_deim, solve_pod_deim  # noqa: E402
from .corrected import CorrectionCoupling, offline_R_trajectory, solve_pod_deimc, solve_podc  # noqa: E402
from .adaptive import prepare_adaptive, run_adaptive_online  # noqa: E402
from .bench import ErrorReport, OfflineArtifacts, relative_error, sweep  # noqa: E402
from .config import ExperimentConfig, preset  # noqa: E402

__all__ = [
    "__version__",
    "RdmorError", "DimensionError", "DomainError", "NumericalError", "SelectionError", "SplitError",
    "DivergenceError", "ConfigError",
    "KineticsModel", "ModelName", "build_model", "fhn", "schnakenberg", "dib",
    "Grid", "SpatialDiscretization", "discretize", "initial_condition",
    "TimeGrid", "SnapshotSet", "FullRun", "run_full", "compute_indicators",
    "PodBasis", "GalerkinOperators", "solve_pod",
    "DeimOperator", "build_deim", "solve_pod_deim",
    "CorrectionCoupling", "offline_R_trajectory", "solve_podc", "solve_pod_deimc",
    "prepare_adaptive", "run_adaptive_online",
    "ErrorReport", "OfflineArtifacts", "relative_error", "sweep",
    "ExperimentConfig", "preset",
]
