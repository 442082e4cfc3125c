"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad ranks, malformed manifests, bad CLI arguments."""


class NumericalError(RuntimeError):
    """Numerical failure: non-finite data or a linear-algebra breakdown."""
