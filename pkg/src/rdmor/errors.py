"""Exception hierarchy shared by all modules."""


class RdmorError(Exception):
    """Base class for package errors."""


class DimensionError(RdmorError, ValueError):
    """Array shapes or counts are incompatible with the requested operation."""


class DomainError(RdmorError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NumericalError(RdmorError, ArithmeticError):
    """A linear-algebra kernel failed or produced an unusable result."""


class SelectionError(NumericalError):
    """Interpolation points could not be selected (rank-deficient basis)."""


class SplitError(RdmorError, ValueError):
    """The time window cannot be split at the requested index."""


class DivergenceError(NumericalError):
    """A time integration produced non-finite or exploding values.

    Attributes
    ----------
    step : int
        Index of the time step whose result was rejected.
    label : str
        Free-form tag naming the run (method, reduced dimension, zone).
    """

    def __init__(self, step, label=""):
        self.step = int(step)
        self.label = label
        where = f" ({label})" if label else ""
        super().__init__(f"integration diverged at step {self.step}{where}")


class ConfigError(RdmorError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")
