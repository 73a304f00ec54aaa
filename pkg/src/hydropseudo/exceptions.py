class HydroPseudoError(Exception):
    """Base class for errors raised by this package."""


class ChamberError(HydroPseudoError, ValueError):
    """A parameter point lies outside the admissible chamber."""


class InterpolationError(HydroPseudoError, ValueError):
    pass


class TransportError(HydroPseudoError, ArithmeticError):
    """Path integration failed; ``arclength`` is where it stopped."""

    def __init__(self, message, arclength):
        super().__init__(f"{message} (at arclength {arclength:.6g})")
        self.arclength = arclength


class DegeneracyError(HydroPseudoError, ArithmeticError):
    """A block that must be invertible is numerically singular."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class SingularPointError(HydroPseudoError, ZeroDivisionError):
    """Evaluation hit a pole, a movable singularity or a branch cut."""


class ThetaTruncationError(HydroPseudoError, ValueError):
    pass


class ConfigError(HydroPseudoError, ValueError):
    pass


class BranchCutError(SingularPointError):
    """A fractional power was requested too close to its branch cut."""
