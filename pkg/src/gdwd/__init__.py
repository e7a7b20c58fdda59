"""Generalized distance weighted discrimination trained by an inexact
symmetric Gauss-Seidel ADMM."""

from .errors import (BreakdownError, DWDError, InvalidInputError, NumericalError,
                     ParseError)
from .ingest import binarize_labels, build_Z, load_libsvm, parse_libsvm, write_libsvm
from .metrics import classification_error, kkt_residuals
from .model import (ProblemData, ScaledProblem, TrainedModel, compute_class_weights,
                    compute_penalty_parameter, median_interclass_distance, scale_problem)
from .solver import SolveResult, SolverOptions, Status, Variant, solve, training_error

__version__ = "0.1.0"

__all__ = [
    "BreakdownError", "DWDError", "InvalidInputError", "NumericalError", "ParseError",
    "binarize_labels", "build_Z", "load_libsvm", "parse_libsvm", "write_libsvm",
    "classification_error", "kkt_residuals",
    "ProblemData", "ScaledProblem", "TrainedModel", "compute_class_weights",
    "compute_penalty_parameter", "median_interclass_distance", "scale_problem",
    "SolveResult", "SolverOptions", "Status", "Variant", "solve", "training_error",
]
