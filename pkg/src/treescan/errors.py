"""Exception types raised by the engine."""


class TreeScanError(Exception):
    """Base class for all engine errors."""


class ConfigError(TreeScanError, ValueError):
    """Inconsistent dimensions or out-of-range configuration values."""


class NumericError(TreeScanError, ArithmeticError):
    """A non-finite value appeared, or an eigensolve failed."""


class StructureError(TreeScanError):
    """A graph is not connected or a tree is malformed."""
