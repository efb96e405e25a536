"""Exception and warning types shared across the package."""

from __future__ import annotations


class HypernbError(Exception):
    """Base class for all package errors."""


class InputError(HypernbError):
    """Malformed user input (files, CLI arguments, config)."""


class InvalidTensor(InputError):
    """Probability tensor violates its invariants (negative or non-finite entries, bad keys)."""


class AssumptionViolation(HypernbError):
    """A model assumption required by downstream algebra does not hold."""


class DegenerateModel(HypernbError):
    """No recoverable eigenspace (r0 = 0); the caller decides whether to proceed."""


class IndexOutOfRange(HypernbError):
    """Eigenspace index outside the recoverable range."""


class ProbabilityOverflow(HypernbError):
    """A per-hyperedge inclusion probability exceeds 1."""


class PopulationCap(HypernbError):
    """Branching-process simulation exceeded its node budget (runaway parameters)."""


class DimensionMismatch(HypernbError):
    """Vector length does not match the operator dimension."""


class PoleError(HypernbError):
    """Spectral parameter hits a pole of the operator pencil."""


class SingularMatrix(HypernbError):
    """Determinant evaluation underflowed irrecoverably."""


class NoConvergence(HypernbError):
    """Eigensolver failed to converge and no partial results are available."""


class ComplexOutlier(HypernbError):
    """A flagged outlier has a non-negligible imaginary part (borderline or invalid regime)."""


class ZeroVector(HypernbError):
    """An input vector that must be nonzero is zero."""


class InvalidThreshold(HypernbError):
    """Rounding threshold must be positive."""


class LengthMismatch(HypernbError):
    """Two assignments have different lengths."""


class NotApplicable(HypernbError):
    """A closed-form method was requested outside its domain of validity."""


class DepthExceeded(HypernbError):
    """Requested functional depth exceeds the sampled tree depth."""


class RegimeWarning(UserWarning):
    """The computation runs but outside the regime covered by the theory."""


class DepthTooLargeWarning(RegimeWarning):
    """Requested power depth exceeds the proven cap."""


class UnbalancedCommunitiesWarning(RegimeWarning):
    """Reconstruction guarantees assume balanced communities."""


class NoConvergenceWarning(RegimeWarning):
    """Eigensolver returned best-effort unconverged pairs."""


class NoImprovementWarning(RegimeWarning):
    """Numeric weight search did not beat the unweighted baseline; baseline returned."""
