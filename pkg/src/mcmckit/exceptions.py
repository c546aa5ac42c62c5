"""Exception hierarchy shared by every mcmckit module."""


class McmcError(Exception):
    """Base class for all mcmckit errors."""


class ConfigurationError(McmcError, ValueError):
    """A parameter or configuration value is invalid.

    ``field`` names the offending parameter so front ends can report it.
    """

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class RejectedInputError(McmcError, ValueError):
    """An input point, sample set or chain does not satisfy a precondition."""


class UndefinedVarianceError(McmcError, ValueError):
    """A series has zero variance, so correlation quantities are undefined."""


class InconsistentStrategyError(McmcError, ValueError):
    """A sampling strategy produced a point where its own pdf is zero."""


class DegenerateIntegrandError(McmcError, RuntimeError):
    """The integrand is zero everywhere the sampler could look."""


class DivergenceError(McmcError, RuntimeError):
    """An iterative procedure left the finite region it is guarded to."""
