"""Cahn-Hilliard-Biot simulator with sharp-interface diagnostics."""
from .assembly import BoundaryConditions, TimeScheme, step
from .grid import Field, Grid, GridSpec, VectorField, make_grid
from .model import MaterialParams, SourceConfig, State
from .solver import SolverConfig

__version__ = "0.1.0"

__all__ = [
    "BoundaryConditions", "Field", "Grid", "GridSpec", "MaterialParams", "SolverConfig",
    "SourceConfig", "State", "TimeScheme", "VectorField", "make_grid", "step",
]
