"""Exception taxonomy shared across the package.

Every error raised on purpose derives from :class:`QuasiworkError` so
callers can catch package failures with a single except clause.  The
command line maps subclasses onto exit codes: configuration problems
exit 2, numerical/invariant failures exit 3.
"""


class QuasiworkError(Exception):
    """Base class for all errors raised by this package."""


class NotHermitianError(QuasiworkError):
    """A matrix required to be Hermitian is not, beyond tolerance."""


class WrongDimensionError(QuasiworkError):
    """An operand has a shape the operation does not support."""


class DimensionMismatchError(QuasiworkError):
    """Two operands that must share a dimension do not."""


class NonHermitianSampleError(NotHermitianError):
    """A sampled Hamiltonian in a drive schedule is not Hermitian."""


class BadProbabilityError(QuasiworkError):
    """A probability, density matrix, or Kraus family fails positivity
    or normalization requirements."""


class ZeroCoherenceError(QuasiworkError):
    """The detector preparation has no coherence between the selected
    eigenstates, so the generating-function normalization divides by
    zero."""


class EnumerationCapExceededError(QuasiworkError):
    """The path-pair enumeration would exceed the configured cap."""


class NonRealWeightError(QuasiworkError):
    """A merged comb weight kept a non-negligible imaginary part."""


class NormalizationError(QuasiworkError):
    """Comb weights do not sum to one within tolerance."""


class GridTooCoarseError(QuasiworkError):
    """A sample grid is too small or malformed for the requested
    numerical operation."""


class IllConditionedError(QuasiworkError):
    """A recovery problem is too ill conditioned to trust."""


class ConvergenceError(QuasiworkError):
    """An iterative solver failed to converge within its sweep budget."""


class InvariantViolationError(QuasiworkError):
    """A cross-route or conservation invariant failed at runtime."""


class ConfigError(QuasiworkError):
    """A scenario configuration file is missing, malformed, or
    inconsistent."""
