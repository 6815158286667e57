"""Deformed Marchenko-Pastur laws, VESD statistics, and Monte Carlo experiments."""

__version__ = "0.1.0"

from mpvesd.law import (
    HalfPlanePoint,
    LawVector,
    NonConvergence,
    PopulationSpectrum,
    SolvedLaw,
    SolverOptions,
    density_rho2c,
    find_support,
    solve_law,
    solve_m2c,
)

__all__ = [
    "HalfPlanePoint",
    "LawVector",
    "NonConvergence",
    "PopulationSpectrum",
    "SolvedLaw",
    "SolverOptions",
    "density_rho2c",
    "find_support",
    "solve_law",
    "solve_m2c",
    "__version__",
]
