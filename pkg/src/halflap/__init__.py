"""Numerical laboratory for the half-Laplacian Allen-Cahn equation via its harmonic extension."""

from .energy import EnergyBreakdown, ScalingFit, energy_breakdown, energy_scan, scaling_fit
from .grid import CylinderDomain, ScalarField, UniformGrid, WedgeDomain
from .nonlinearity import Nonlinearity, allen_cahn, builtin, sine
from .solver import SolveConfig, Solution, minimize_cylinder, saddle_minimize

__all__ = [
    "CylinderDomain", "EnergyBreakdown", "Nonlinearity", "ScalarField", "ScalingFit",
    "SolveConfig", "Solution", "UniformGrid", "WedgeDomain", "allen_cahn", "builtin",
    "energy_breakdown", "energy_scan", "minimize_cylinder", "saddle_minimize", "scaling_fit",
    "sine",
]

__version__ = "0.1.0"
