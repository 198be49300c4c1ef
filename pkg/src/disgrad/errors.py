"""Exception types shared across the package."""


class DisgradError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameter(DisgradError, ValueError):
    """A caller supplied a parameter outside its documented domain."""


class AssumptionViolation(DisgradError, RuntimeError):
    """A structural assumption of the method does not hold.

    The message always names the violated assumption (e.g. connectivity,
    double stochasticity) so experiment drivers can surface it verbatim.
    """


class RunAborted(DisgradError, RuntimeError):
    """An iteration produced unusable output (non-finite values)."""


class ConfigError(DisgradError, ValueError):
    """An experiment config failed to parse or validate."""
