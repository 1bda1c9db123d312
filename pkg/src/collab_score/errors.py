"""Exception hierarchy shared by every collab_score module."""

from __future__ import annotations


class CollabScoreError(RuntimeError):
    """Root of all errors raised by collab_score."""


class InvalidArg(CollabScoreError, ValueError):
    """Raised when a scalar argument is outside its domain."""


class NegativeArg(InvalidArg):
    """Raised when a penalty is evaluated at a negative magnitude."""


class NonpositiveStep(InvalidArg):
    """Raised when a proximal step size is not strictly positive."""


class DimensionMismatch(CollabScoreError, ValueError):
    """Raised when array shapes disagree."""


class NotSymmetric(CollabScoreError, ValueError):
    """Raised when a matrix expected to be symmetric is not."""


class InvalidCovariance(CollabScoreError, ValueError):
    """Raised when a covariance specification is not SPD."""


class InvalidConfig(CollabScoreError, ValueError):
    """Raised when a simulation or stage configuration is inconsistent."""


class SchemaMismatch(CollabScoreError, ValueError):
    """Raised when site files disagree on columns or response domain."""


class EmptySite(CollabScoreError, ValueError):
    """Raised when a site holds no observations."""


class BadHypothesis(CollabScoreError, ValueError):
    """Raised when a linear hypothesis is malformed or rank deficient."""


class NumericalError(CollabScoreError):
    """Base class for failures of the numerical pipeline."""


class NearSingular(NumericalError):
    """Raised when an eigenvalue falls below the configured floor."""


class RankDeficient(NumericalError):
    """Raised when a constraint matrix does not have full row rank."""


class Diverged(NumericalError):
    """Raised when backtracking stalls or the outer iterates run away."""


class NonFinite(NumericalError):
    """Raised when an iterate or objective value becomes NaN or infinite."""


class NoEligibleSites(NumericalError):
    """Raised when every site is excluded from variance estimation."""


class SiteUnreachable(CollabScoreError, ConnectionError):
    """Raised when a remote site cannot be reached or hangs up mid-round."""


class MonteCarloAborted(CollabScoreError):
    """Raised when too many Monte Carlo replications fail."""


class IoError(CollabScoreError, OSError):
    """Reading inputs or writing result files failed."""
