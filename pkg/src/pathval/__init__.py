"""Validated solution-path selection for data-driven chance-constrained
optimization.

Build a path of candidate decisions from a parametrized reformulation
(robust, moment-robust, sampled-constraint, or segment search), then pick
the least conservative candidate that clears a statistical feasibility
margin on held-out data.
"""

from .errors import PathvalError
from .estimator import ChanceConstrainedPathSelector
from .harness import ExperimentConfig, run_experiment, summarize_records
from .instances import GaussianLinearCcp, generate_canonical_instance
from .numerics import RngStream
from .reformulations import GridSpec, SolutionPath, build_grid, build_path
from .validators import MarginRule, ValidationReport, evaluate_h_matrix, select_candidate

__all__ = [
    "PathvalError",
    "ChanceConstrainedPathSelector",
    "ExperimentConfig",
    "run_experiment",
    "summarize_records",
    "GaussianLinearCcp",
    "generate_canonical_instance",
    "RngStream",
    "GridSpec",
    "SolutionPath",
    "build_grid",
    "build_path",
    "MarginRule",
    "ValidationReport",
    "evaluate_h_matrix",
    "select_candidate",
]

__version__ = "0.1.0"
