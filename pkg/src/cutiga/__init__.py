"""Least-squares stabilized symmetric Nitsche method for the 2D Poisson
problem on cut uniform B-spline grids, with the standard symmetric Nitsche
baseline, basis function removal and the associated convergence /
conditioning / coercivity studies."""

__version__ = "0.1.0"

from .geometry import (
    BackgroundGrid,
    ImmersedDomain,
    make_unit_circle_domain,
    make_unit_square_domain,
)
from .splines import SplineSpace1D, TensorSplineSpace
from .assembly import MethodParams, ProblemData, SystemMatrices, assemble, assemble_standard

__all__ = [
    "BackgroundGrid",
    "ImmersedDomain",
    "make_unit_circle_domain",
    "make_unit_square_domain",
    "SplineSpace1D",
    "TensorSplineSpace",
    "MethodParams",
    "ProblemData",
    "SystemMatrices",
    "assemble",
    "assemble_standard",
]
