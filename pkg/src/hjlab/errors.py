"""Exception types shared across the package."""


class HJLabError(Exception):
    """Base class for all package-specific failures."""


class SearchWindowTooSmall(HJLabError):
    """Legendre argmax landed on the momentum search-window boundary."""


class VelocityOutOfWindow(HJLabError):
    """Requested velocity exceeds the sampled velocity window."""


class TableWindowTooSmall(HJLabError):
    """Velocity window cannot certify the requested constant chain."""


class NonConvexBlend(HJLabError):
    """Truncation blend failed the sampled convexity audit."""


class DegenerateForms(HJLabError):
    """Constant parts of the basis forms are linearly dependent."""


class WindowExhausted(HJLabError):
    """Evolution consumed the whole valid region of the window."""


class NotConverged(HJLabError):
    """Long-time average did not settle within tolerance."""


class DualRangeExceeded(HJLabError):
    """Dual transform argmax landed on the sampled grid boundary."""


class CorrectorMismatch(HJLabError):
    """Corrector was computed for a different cohomology vector."""


class ConfigError(HJLabError):
    """Configuration file is malformed or fails validation."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
