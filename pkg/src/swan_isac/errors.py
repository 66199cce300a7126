"""Exception types raised across the package."""


class SwanError(Exception):
    """Base class for all package errors."""


class InvalidSegment(SwanError, IndexError):
    pass


class InvalidInput(SwanError, ValueError):
    pass


class DegenerateGeometry(SwanError, ValueError):
    pass


class SegmentViolation(SwanError, ValueError):
    pass


class ShapeError(SwanError, ValueError):
    pass


class SingularFim(SwanError, ArithmeticError):
    """The Fisher information matrix is singular or too ill-conditioned to invert."""


class DegenerateStep(SwanError, ArithmeticError):
    """A retraction step collapsed the beamformer to the zero matrix."""


class LineSearchFailure(SwanError, RuntimeError):
    pass


class PreconditionError(SwanError, ValueError):
    pass


class ConfigError(SwanError, ValueError):
    pass


class IoError(SwanError, OSError):
    pass
