"""Exception types shared across the package."""


class FadingBCError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(FadingBCError, ValueError):
    """Shapes or sizes of inputs are inconsistent or out of range."""


class DivergenceError(FadingBCError, ValueError):
    """A requested quantity has no finite value (e.g. E[1/|h|^2] at M=1)."""


class InfeasibleError(FadingBCError, ValueError):
    """The requested rates cannot be supported (e.g. zero-gain channel)."""


class ConfigError(FadingBCError, ValueError):
    """A scenario/config file is malformed or self-inconsistent."""
