"""Unsupervised regularization-parameter selection for the elastic net."""

__version__ = "0.1.0"

from .model import (DegenerateSpectrumError, GroundTruth, InvalidInputError,  # noqa: E402
                    InverseProblem, SpectralData, spectral_data)
from .solver import ParamGrid, SolveConfig, Solution, build_grid, solution_path, solve  # noqa: E402
from .subspace import (HCriterion, TrainingSet, empirical_covariance,  # noqa: E402
                       empirical_estimator, estimate_h, top_h_projection)
from .loss import LossSurface, grid_minimize  # noqa: E402
from .opten import OptENConfig, opten_select  # noqa: E402

__all__ = [
    "DegenerateSpectrumError", "GroundTruth", "HCriterion", "InvalidInputError",
    "InverseProblem", "LossSurface", "OptENConfig", "ParamGrid", "Solution",
    "SolveConfig", "SpectralData", "TrainingSet", "build_grid", "empirical_covariance",
    "empirical_estimator", "estimate_h", "grid_minimize", "opten_select",
    "solution_path", "solve", "spectral_data", "top_h_projection",
]
