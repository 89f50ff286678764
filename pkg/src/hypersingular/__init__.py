"""Exact solutions and benchmark solvers for nonlinear singularly perturbed problems
whose boundary layers have exponentially large slopes."""

from .errors import HypersingularError, NumericalError, SpecError
from .linearize import (
    FieldSample,
    LinearProblem,
    PTransform,
    inverse_map,
    p3_transform,
    residual_identity_check,
    transform,
)
from .oracles import (
    classify_layer,
    exact_solution,
    oracle_p1,
    oracle_p1_derivatives,
    oracle_p2_constant,
    oracle_p3_implicit,
    oracle_p3_left_derivative,
    oracle_p4,
    oracle_p4_derivative,
)
from .problem import (
    GridFunction,
    Kind,
    LayerClass,
    LogGridFunction,
    Mesh,
    ProblemSpec,
    ScalarParams,
    SolveReport,
    Status,
    make_spec,
    shishkin_mesh,
    spec_from_json,
    spec_to_json,
    uniform_mesh,
)
from .solvers import SolverConfig, solve_direct_newton, solve_elliptic_2d, solve_linear_fd, solve_pipeline, thomas_solve
from .stable import LogReal

__all__ = [
    "FieldSample",
    "GridFunction",
    "HypersingularError",
    "Kind",
    "LayerClass",
    "LinearProblem",
    "LogGridFunction",
    "LogReal",
    "Mesh",
    "NumericalError",
    "PTransform",
    "ProblemSpec",
    "ScalarParams",
    "SolveReport",
    "SolverConfig",
    "SpecError",
    "Status",
    "classify_layer",
    "exact_solution",
    "inverse_map",
    "make_spec",
    "oracle_p1",
    "oracle_p1_derivatives",
    "oracle_p2_constant",
    "oracle_p3_implicit",
    "oracle_p3_left_derivative",
    "oracle_p4",
    "oracle_p4_derivative",
    "p3_transform",
    "residual_identity_check",
    "shishkin_mesh",
    "solve_direct_newton",
    "solve_elliptic_2d",
    "solve_linear_fd",
    "solve_pipeline",
    "spec_from_json",
    "spec_to_json",
    "thomas_solve",
    "transform",
    "uniform_mesh",
]

__version__ = "0.1.0"
