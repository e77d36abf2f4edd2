"""Exception types shared across the package."""


class SaraError(Exception):
    """Base class for all library errors."""


class LengthMismatchError(SaraError):
    """Array length does not match the declared dimensions."""


class NonFiniteValueError(SaraError):
    """NaN or infinity where finite values are required."""


class RangeViolationError(SaraError):
    """Probability entry outside [0, 1]."""


class ShapeMismatchError(SaraError):
    """Operands have incompatible shapes."""


class BadMagicError(SaraError):
    """Stream does not start with the SARA magic."""


class UnsupportedVersionError(SaraError):
    """Unknown container version, element type, or header field."""


class TruncatedStreamError(SaraError):
    """Stream ended before the declared payload was read."""


class InfeasibleGeometryError(SaraError):
    """Scenario parameters cannot be realized on the requested map."""


class ZeroVectorError(SaraError):
    """Cosine similarity is undefined for a zero vector."""
