"""Boundary data maps, perturbation determinants and trace formulas for -u'' + V u on [0, R]."""

from __future__ import annotations

__version__ = "0.1.0"

from .boundary import (char_det, delta_ratio, herglotz_check, lambda_asymptotic_leading, lambda_det, lambda_map,
                       lambda_map_upm, lft_transfer, s_matrix, trace_map)
from .discrete import (DiscreteHamiltonian, FormGram, convergence_study, count_decaying, discretize, form_gram,
                       gram_identity_residual, kernel_dimension_probe, sym_det_closed_form, sym_det_discrete,
                       sym_det_rhs)
from .errors import (
    AtEigenvalue, BDMapError, BracketingFailure, DomainViolation, GridMismatch, NonFinite, NotBelowSpectrum,
    NotPD, NotPositiveType, ParseError, PhaseTrackingLost, PreconditionError, QuadratureNotConverged,
    SingularDeterminant, SingularLambda, SingularTransfer, TailTooLarge, ToleranceNotMet, UnsupportedCase,
    ValidationError)
from .ode import (FundamentalValues, SolutionPath, form_eval, l2_inner, propagate_fundamental,
                  solve_with_boundary_data, u_plus_minus, wronskian)
from .positive_type import (PositiveTypeDiagnostics, frac_power_neg, positive_type_diagnostics,
                            resolvent_region_margin, semigroup_check, spectral_oracle_power, sqrt_op,
                            sym_det_matrix, trace_formula_residual)
from .potential import BoundaryAngles, LogScaled, Potential
from .resolvents import (apply_resolvent, boundary_rows, greens_kernel, krein_resolvent, krein_trace,
                         lambda_derivative_identity, row_gram)
from .spectral import (EigenvalueList, SpectralShift, eigenvalues, log_det_derivative, spectral_shift,
                       ssf_counting_oracle, trace_resolvent_diff)

__all__ = [
    "AtEigenvalue",
    "BDMapError",
    "BoundaryAngles",
    "BracketingFailure",
    "DiscreteHamiltonian",
    "DomainViolation",
    "EigenvalueList",
    "FormGram",
    "FundamentalValues",
    "GridMismatch",
    "LogScaled",
    "NonFinite",
    "NotBelowSpectrum",
    "NotPD",
    "NotPositiveType",
    "ParseError",
    "PhaseTrackingLost",
    "PositiveTypeDiagnostics",
    "Potential",
    "PreconditionError",
    "QuadratureNotConverged",
    "SingularDeterminant",
    "SingularLambda",
    "SingularTransfer",
    "SolutionPath",
    "SpectralShift",
    "TailTooLarge",
    "ToleranceNotMet",
    "UnsupportedCase",
    "ValidationError",
    "annotations",
    "apply_resolvent",
    "boundary_rows",
    "char_det",
    "convergence_study",
    "count_decaying",
    "delta_ratio",
    "discretize",
    "eigenvalues",
    "form_eval",
    "form_gram",
    "frac_power_neg",
    "gram_identity_residual",
    "greens_kernel",
    "herglotz_check",
    "kernel_dimension_probe",
    "krein_resolvent",
    "krein_trace",
    "l2_inner",
    "lambda_asymptotic_leading",
    "lambda_derivative_identity",
    "lambda_det",
    "lambda_map",
    "lambda_map_upm",
    "lft_transfer",
    "log_det_derivative",
    "positive_type_diagnostics",
    "propagate_fundamental",
    "resolvent_region_margin",
    "row_gram",
    "s_matrix",
    "semigroup_check",
    "solve_with_boundary_data",
    "spectral_oracle_power",
    "spectral_shift",
    "sqrt_op",
    "ssf_counting_oracle",
    "sym_det_closed_form",
    "sym_det_discrete",
    "sym_det_matrix",
    "sym_det_rhs",
    "trace_formula_residual",
    "trace_map",
    "trace_resolvent_diff",
    "u_plus_minus",
    "wronskian",
    "__version__",
]
