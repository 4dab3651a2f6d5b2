"""Exception types shared across the toolkit."""


class RadmomError(Exception):
    """Base class for all toolkit errors."""


class DomainError(RadmomError, ValueError):
    """An argument lies outside an operation's mathematical domain."""


class ValidationError(RadmomError, ValueError):
    """Structurally invalid input (bad grid, bad config, bad angles)."""


class PrecisionError(RadmomError):
    """Mixed-precision operands, or precision below the supported floor."""


class QuadratureError(RadmomError):
    """Adaptive quadrature exhausted its refinement depth above tolerance."""

    def __init__(self, message, achieved=None, requested=None):
        super().__init__(message)
        self.achieved = achieved
        self.requested = requested


class SingularMatrixError(RadmomError):
    """Linear solve hit a pivot below the rank threshold."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class TruncationError(RadmomError):
    """Sinogram offsets do not cover the transform's support."""


class SupportOverflowError(ValidationError):
    """Mollifier bandwidth exceeds the sinogram's offset padding."""


class MollifierStateError(RadmomError):
    """Operation invalid for the sinogram's mollification state."""


class IncompleteMomentsError(RadmomError):
    """A required moment entry is missing from the triangle."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class ConfigError(ValidationError):
    """Pipeline configuration violates an invariant."""


class StageError(RadmomError):
    """A pipeline stage failed; carries the stage name and cause."""

    def __init__(self, stage, cause):
        super().__init__("stage %r failed: %s" % (stage, cause))
        self.stage = stage
        self.cause = cause
