"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: config problems exit 64,
solver failures exit 2, validation-report failures exit 1.
"""


class RoughSmileError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(RoughSmileError, ValueError):
    """An argument is outside an operation's stated domain."""


class GridMismatchError(RoughSmileError, ValueError):
    """Two grid functions do not live on the same grid."""


class KernelFamilyError(RoughSmileError, ValueError):
    """Operation requires a different kernel family."""


class ConfigError(RoughSmileError, ValueError):
    """A model config (JSON, preset name, family parameters) is malformed."""


class DerivativeUnavailable(RoughSmileError):
    """A function family was asked for a derivative at a kink."""


class DegenerateDenominatorError(RoughSmileError, ValueError):
    """The volatility function vanishes identically on the quadrature grid."""


class OptimizationFailure(RoughSmileError, RuntimeError):
    """Every multi-start descent failed; diagnostics in the message."""


class InversionError(RoughSmileError, ValueError):
    """Option price is outside no-arbitrage bounds, implied vol undefined."""


class EstimatorError(RoughSmileError, RuntimeError):
    """A Monte Carlo estimator is unusable (e.g. too many excluded paths)."""


class BlowUpError(RoughSmileError, RuntimeError):
    """An integration produced a non-finite state."""
