"""Solvability analysis and constructive asymptotic integration for perturbed
second-order linear difference equations D(r_{n-1} D y_{n-1}) = (q_n + sigma_n) y_n.
"""

from .convergence import ConvergenceReport, detect_convergence, evaluate_series
from .diagnostics import (
    DiagnosticsBundle,
    coeff_C,
    compute_diagnostics,
    summation_by_parts_check,
    sup_A,
    tail_H,
    tail_J,
)
from .fss import (
    FundamentalSystem,
    OscillationError,
    ProblemSpec,
    Tolerances,
    build_fss,
    nonprincipal_from_principal,
    principal_from_nonprincipal,
    recessive_by_backward_recurrence,
    step_unperturbed,
    validate_fss,
)
from .sequences import (
    DomainError,
    LogScaledValue,
    PositivityError,
    SequenceSpec,
    forward_difference,
    spec_from_json,
    spec_to_json,
)
from .solvability import Verdict, classify

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport",
    "DiagnosticsBundle",
    "DomainError",
    "FundamentalSystem",
    "LogScaledValue",
    "OscillationError",
    "PositivityError",
    "ProblemSpec",
    "SequenceSpec",
    "Tolerances",
    "Verdict",
    "build_fss",
    "classify",
    "coeff_C",
    "compute_diagnostics",
    "detect_convergence",
    "evaluate_series",
    "forward_difference",
    "nonprincipal_from_principal",
    "principal_from_nonprincipal",
    "recessive_by_backward_recurrence",
    "spec_from_json",
    "spec_to_json",
    "step_unperturbed",
    "summation_by_parts_check",
    "sup_A",
    "tail_H",
    "tail_J",
    "validate_fss",
]
