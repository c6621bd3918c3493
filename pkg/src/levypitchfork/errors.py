"""Exception types raised across the package."""


class ParameterError(ValueError):
    """A parameter lies outside its admissible domain."""


class EmptyPathError(ValueError):
    """A time grid or path with zero steps was requested."""


class OutOfWindowError(IndexError):
    """A time index or shift falls outside the recorded noise window."""


class PositivityError(ValueError):
    """A density that must be strictly positive has a non-positive entry."""


class CollapseError(RuntimeError):
    """Pullback iteration did not collapse the attractor bracket to a point."""

    def __init__(self, message, failed_paths=()):
        super().__init__(message)
        self.failed_paths = tuple(failed_paths)


class NonConvergenceError(RuntimeError):
    """The stationary solver did not reach its residual target."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)
