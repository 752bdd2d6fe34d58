"""Error types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent user configuration."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or produced an invalid state."""
