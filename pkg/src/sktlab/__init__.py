"""Entropy-structure laboratory for n-species SKT reaction-cross-diffusion systems."""
from .entropy import CutoffSpec
from .errors import (ConfigError, GridMismatchError, HypothesisError, InputError, SKTError,
                     SolverError)
from .grid import Field, Grid
from .model import ModelSpec, validate_hypotheses
from .reactions import ReactionSpec, Sampling

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "CutoffSpec", "Field", "Grid", "GridMismatchError", "HypothesisError",
    "InputError", "ModelSpec", "ReactionSpec", "SKTError", "Sampling", "SolverError",
    "validate_hypotheses", "__version__",
]
