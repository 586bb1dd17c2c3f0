"""Finite-volume discretisation, implicit time stepping and strong-solution proxies."""
from ..grid import Field, Grid, transfer
from .fv import (NewtonOptions, StepInfo, Trajectory, discrete_entropy, fv_operator, fv_residual,
                 simulate, step_implicit)
from .proxy import FineGridProxy, ManufacturedProxy, fine_grid_proxy, manufactured_strong

__all__ = [
    "Field", "Grid", "transfer", "NewtonOptions", "StepInfo", "Trajectory", "discrete_entropy",
    "fv_operator", "fv_residual", "simulate", "step_implicit", "FineGridProxy",
    "ManufacturedProxy", "fine_grid_proxy", "manufactured_strong",
]
