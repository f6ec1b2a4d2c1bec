"""Exception hierarchy shared by the package."""


class ASEPError(Exception):
    """Base class for every error raised by periodic_asep."""


class ParameterError(ASEPError, ValueError):
    """Model parameters outside the supported range (q = 0, tau = 1, tau = 0 where singular)."""


class DomainError(ASEPError, ValueError):
    """Argument outside an operation's domain."""


class PoleError(ASEPError, ZeroDivisionError):
    """A denominator vanished; usually a contour placed on a singularity."""


class ResourceError(ASEPError, RuntimeError):
    """Requested enumeration or sampling exceeds the configured caps."""


class ConfigError(ASEPError, ValueError):
    """Malformed run configuration."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
