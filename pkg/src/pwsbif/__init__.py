"""Numerical analysis of planar piecewise-smooth continuous systems near a
simultaneous discontinuous and Andronov-Hopf bifurcation."""

from .curves import BifurcationCurve, CurveSample, emit_csv, read_csv
from .flow import DEFAULT_OPTIONS, IntegratorOptions, Section, integrate, min_signed_distance, poincare_return
from .normalform import build_transform, compute_invariants, criticality, locate_codim2, predicted_coefficients
from .system import NormalFormSystem, PiecewiseSystem, check_continuity, get_system, make_example_normalform, make_example_raw

__version__ = "0.1.0"

__all__ = [
    "BifurcationCurve",
    "CurveSample",
    "DEFAULT_OPTIONS",
    "IntegratorOptions",
    "NormalFormSystem",
    "PiecewiseSystem",
    "Section",
    "build_transform",
    "check_continuity",
    "compute_invariants",
    "criticality",
    "emit_csv",
    "get_system",
    "integrate",
    "locate_codim2",
    "make_example_normalform",
    "make_example_raw",
    "min_signed_distance",
    "poincare_return",
    "predicted_coefficients",
    "read_csv",
]
