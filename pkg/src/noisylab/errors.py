"""Exception types shared across the package.

Generic bad arguments raise plain ValueError; the classes here exist where
callers (mainly the CLI) need to tell failure modes apart.
"""


class NoisyLabError(Exception):
    """Base class for package-specific errors."""


class ConfigError(NoisyLabError):
    """Experiment config file is missing, malformed, or inconsistent."""


class DivergenceError(NoisyLabError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class ResourceLimitError(NoisyLabError):
    """Requested brute-force instance exceeds the enumeration budget."""


class IdxFormatError(NoisyLabError):
    """IDX byte stream has a wrong magic, bad length, or invalid payload."""


class EmptySubsetError(NoisyLabError):
    """A statistic was requested over an empty sample subset."""


class UnsupportedLossError(NoisyLabError):
    """Loss cannot be evaluated in the requested context."""
