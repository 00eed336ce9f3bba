"""Pseudo-spectral solver and verification harness for the dissipative
surface quasi-geostrophic equation with large background data.

Modules
-------
spectral
    Periodic grids, spectral fields, norms, velocity map and dealiased products.
data
    The large-data family, the analytic linear background, the smallness
    condition and the norm lower bounds.
evolution
    Exponential time stepping of the full and perturbation equations.
diagnostics
    Energy ledger, trajectory records and the a-priori bound check.
inequalities
    Empirical constants for commutator and interpolation inequalities.
config, cli
    Flat key/value configuration and the ``sqglab`` command.
"""

from .data import (
    Background,
    DataRecipe,
    VerificationParams,
    background_at,
    build_chi,
    corollary_bounds,
    corollary_grid,
    evaluate_condition,
    forcing_at,
)
from .diagnostics import energy_ledger, ledger_consistency, theorem_bound_check
from .evolution import SimParams, SimState, run, step
from .spectral import Grid, SpectralField, VectorField

__version__ = "0.1.0"

__all__ = [
    "Background",
    "DataRecipe",
    "Grid",
    "SimParams",
    "SimState",
    "SpectralField",
    "VectorField",
    "VerificationParams",
    "background_at",
    "build_chi",
    "corollary_bounds",
    "corollary_grid",
    "energy_ledger",
    "evaluate_condition",
    "forcing_at",
    "ledger_consistency",
    "run",
    "step",
    "theorem_bound_check",
]
