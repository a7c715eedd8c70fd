"""Exception types raised across the toolkit."""


class GeometryError(ValueError):
    """Antenna/scatterer geometry is invalid or degenerate."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class DimensionError(ValueError):
    """Matrix or tensor shapes are incompatible."""


class SingularityError(ArithmeticError):
    """A Gram matrix is too ill-conditioned to invert without regularization."""


class ArchitectureError(ValueError):
    """A network layout does not map the input shape back to the channel shape."""


class UnsupportedRatioError(ArchitectureError):
    """No integer stride pair rescales the conditional input to the channel size."""


class IntegrityError(IOError):
    """A persisted artifact is truncated, corrupted or of an unknown version."""


class TrainingAborted(RuntimeError):
    """Training produced a non-finite loss.

    The partially trained state is attached as ``state`` so callers can
    inspect or persist it.
    """

    def __init__(self, message, state=None, dump_path=None):
        super().__init__(message)
        self.state = state
        self.dump_path = dump_path


class UndefinedMetricError(ValueError):
    """The reference channel has zero norm, so NMSE is undefined."""


class ConfigError(ValueError):
    """A configuration file or override is malformed."""
