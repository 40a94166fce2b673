"""Zero-order bi-level optimization library and experiment harness."""

from .config import ConfigError, Estimator, ProblemConfig, SearchConfig, load_config
from .driver import (
    LandscapeGrid,
    SearchTrajectory,
    landscape_grid,
    run_search,
    trajectory_trace,
)
from .inner import InnerSolveError, InnerSolveReport, darts2_hvp_difference, darts_grad, solve_inner
from .problems import (
    AnalyticQuadraticProblem,
    BilevelProblem,
    ToySupernet,
    build_problem,
    make_analytic,
)
from .rng import orthonormal_pair, rng_split, sample_gaussian, sample_sphere
from .types import ArchParams, InnerState, Perturbation

__version__ = "0.1.0"

__all__ = [
    "AnalyticQuadraticProblem",
    "ArchParams",
    "BilevelProblem",
    "ConfigError",
    "Estimator",
    "InnerSolveError",
    "InnerSolveReport",
    "InnerState",
    "LandscapeGrid",
    "Perturbation",
    "ProblemConfig",
    "SearchConfig",
    "SearchTrajectory",
    "ToySupernet",
    "build_problem",
    "darts2_hvp_difference",
    "darts_grad",
    "landscape_grid",
    "load_config",
    "make_analytic",
    "orthonormal_pair",
    "rng_split",
    "run_search",
    "sample_gaussian",
    "sample_sphere",
    "solve_inner",
    "trajectory_trace",
]
