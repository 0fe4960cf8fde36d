"""Exception types raised by the construction and verification routines."""


class OrdZeroError(Exception):
    """Base class for every error raised by this package."""


class TruncationFailure(OrdZeroError):
    pass


class PrecisionOverflow(OrdZeroError):
    def __init__(self, level, required_bits, message=None):
        self.level = level
        self.required_bits = required_bits
        super().__init__(
            message
            or f"level n={level} needs a big-float context with at least "
            f"{required_bits} mantissa bits"
        )


class Overflow(OrdZeroError):
    pass


class QuadratureUnderresolved(OrdZeroError):
    pass


class SubharmonicityViolation(OrdZeroError):
    def __init__(self, message, points=()):
        self.points = list(points)
        super().__init__(message)


class GridTooCoarse(OrdZeroError):
    pass


class NoConvergence(OrdZeroError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(message)


class PPPFailure(OrdZeroError):
    """A lattice point failed one of the periodic-point checks."""

    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message)


class OrbitResidualTooLarge(PPPFailure):
    pass


class PrimitivityFailure(PPPFailure):
    pass


class DegenerateJacobian(PPPFailure):
    pass


class ConfigError(OrdZeroError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
