"""Exception types shared across the package."""


class GMertonError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(GMertonError, ValueError):
    """An argument violates a documented precondition."""


class SingularParametersError(GMertonError, ValueError):
    """A parameter combination makes a formula undefined (e.g. sigma == sigma_r)."""


class ResourceLimitError(GMertonError):
    """A requested computation exceeds a configured resource cap."""


class ConfigError(GMertonError):
    """Invalid experiment configuration. Carries the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
