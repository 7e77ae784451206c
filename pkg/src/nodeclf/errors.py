"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not line up."""


class ConfigError(ValueError):
    """A configuration or argument value violates its documented range."""


class SolverError(RuntimeError):
    """Base class for numerical integration failures."""


class StepLimitError(SolverError):
    """The integrator hit max_steps before reaching the end time.

    Carries the partial step counters in ``stats``.
    """

    def __init__(self, message, stats):
        super().__init__(message)
        self.stats = stats


class DivergenceError(SolverError):
    """The integrated state stopped being finite.

    ``t`` is the time at which the non-finite state was produced.
    """

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class TrainingError(RuntimeError):
    """Training diverged.  ``epoch`` is the epoch in which it happened."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class DataFormatError(ValueError):
    """A dataset or score file is malformed.  ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ModelFileError(ValueError):
    """A model file is unreadable, corrupt, or has an unknown version."""


class UndefinedMetricError(ValueError):
    """The requested metric is undefined for the given inputs."""
