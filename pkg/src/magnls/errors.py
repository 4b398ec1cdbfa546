"""Exception hierarchy for the toolkit.

Every failure mode that a caller may want to branch on gets its own class;
all inherit from MagnlsError so the CLI can map them to exit codes.
"""


class MagnlsError(Exception):
    """Base class for all toolkit errors."""


class NonConvergence(MagnlsError):
    """An iterative procedure failed to reach its tolerance."""


class SupercriticalExponent(MagnlsError):
    """Nonlinearity exponent outside (1, (n+2)/(n-2))."""


class DomainError(MagnlsError):
    """Evaluation outside the mathematical domain (e.g. 1+V <= 0)."""


class ParseError(MagnlsError):
    """Malformed field expression.

    Attributes: position (character offset), expected (set of token names).
    """

    def __init__(self, message, position, expected=()):
        super().__init__(f"{message} at offset {position}")
        self.position = position
        self.expected = frozenset(expected)


class UnknownIdentifier(MagnlsError):
    """Identifier in a field expression that is neither a variable nor a
    known function."""


class TooLarge(MagnlsError):
    """Requested grid exceeds the configured memory budget."""


class GridMismatch(MagnlsError):
    """Two fields that must share a grid do not."""


class OutOfBox(MagnlsError):
    """Ansatz center too close to the grid boundary for the decay margin."""


class IllConditioned(MagnlsError):
    """Tangent-frame Gram matrix condition number beyond the cutoff."""


class LinearSolveFailure(MagnlsError):
    """Inner Krylov solve stalled or exceeded its iteration cap."""


class ContractionFailure(MagnlsError):
    """The correction fixed point diverged or hit max_iter; usually the
    semiclassical parameter is too large for this (xi, sigma)."""


class EigenSolveFailure(MagnlsError):
    """Eigenvalue estimation failed to converge."""


class NewtonDivergence(MagnlsError):
    """Damped Newton could not reduce the residual."""


class SingularHessian(MagnlsError):
    """Newton linearization singular beyond the gauge mode."""


class FlatField(MagnlsError):
    """No isolated modulus maximum to locate a peak from."""


class ClusterAmbiguous(MagnlsError):
    """Critical-point cluster fits no shape template within tolerance."""


class ConfigError(MagnlsError):
    """Run configuration violates the schema."""
