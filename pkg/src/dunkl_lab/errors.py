"""Exception types shared across the package."""


class DunklLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(DunklLabError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateDirectionError(InvalidArgumentError):
    """The direction used to split a root system is orthogonal to a root."""


class GroupCapExceededError(DunklLabError):
    """Reflection closure grew past the configured element cap."""


class DomainError(DunklLabError, ValueError):
    """A function was evaluated outside its domain of definition."""


class SingularDriftError(DomainError):
    """The drift field was evaluated on a reflecting hyperplane."""


class SingularClockError(DomainError):
    """A jump clock integrand hit a zero denominator on the grid."""


class InvalidPlanError(InvalidArgumentError):
    """A lift plan requests the Poisson shortcut where it is not valid."""


class UnsupportedRegimeError(InvalidArgumentError):
    """Parameters fall outside the regime the construction supports."""


class StepFailureError(DunklLabError):
    """An integration step could not be completed within its halving budget."""


class ConfigError(DunklLabError, ValueError):
    """A run configuration failed schema validation.

    ``pointer`` locates the offending entry as a JSON pointer.
    """

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
