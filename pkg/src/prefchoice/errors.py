"""Exception types shared across the package."""


class PrefChoiceError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PrefChoiceError):
    """Invalid or unparsable experiment configuration."""


class PhaseError(PrefChoiceError):
    """Operation requested outside its supported phase (alpha below critical)."""


class DomainError(PrefChoiceError):
    """Argument outside the mathematical domain of an operation."""


class SizeError(PrefChoiceError):
    """Instance too large for an exact enumeration."""


class ShapeError(PrefChoiceError):
    """Density shape violates the assumptions of an approximation."""


class RangeError(PrefChoiceError):
    """Not enough usable data points in the requested range."""
