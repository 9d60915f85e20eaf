"""Typed errors raised by the library.

ValidationError subclasses signal bad inputs (CLI exit code 1);
anything else escaping the library is a runtime failure (exit code 2).
"""


class ValidationError(ValueError):
    """Base class for rejected inputs."""


class AlphaOutOfRange(ValidationError):
    """Label-noise probability outside the allowed interval."""


class NonPositiveRate(ValidationError):
    """Edge-rate numerator a or b is not strictly positive."""


class RateExceedsN(ValidationError):
    """Edge-rate numerator exceeds the vertex count, so a/n or b/n > 1."""


class VertexOutOfRange(ValidationError):
    """Vertex id not in [0, n)."""


class DepthTooLarge(ValidationError):
    """Expected branching-process node count exceeds the memory budget."""


class LengthMismatch(ValidationError):
    """Paired per-vertex arrays have different lengths."""


class TooLarge(ValidationError):
    """Instance too large for brute-force enumeration."""


class NegativeV(ValidationError):
    """Density-evolution state v must be >= 0."""


class NonPositiveV(ValidationError):
    """Density-evolution state v must be > 0 for this operation."""
