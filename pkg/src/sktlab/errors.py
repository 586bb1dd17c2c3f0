"""Exception hierarchy."""


class SKTError(Exception):
    """Base class for all sktlab errors."""


class InputError(SKTError, ValueError):
    """Rejected input: negative or non-finite densities, bad shapes, bad parameters."""


class HypothesisError(SKTError):
    """A model fails a structural hypothesis required by the requested operation."""


class GridMismatchError(InputError):
    """Fields live on different grids, or grids are not nested."""


class SolverError(SKTError):
    """Newton failure after all time-step reductions.

    ``diagnostics`` holds the last residual norms and step sizes tried;
    ``trajectory`` is the partial trajectory when raised from ``simulate``.
    """

    def __init__(self, message, diagnostics=None, trajectory=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        self.trajectory = trajectory


class ConfigError(SKTError):
    """Malformed or invalid run configuration."""
