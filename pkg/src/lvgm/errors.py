"""Exception types raised by lvgm."""

import numpy as np


class DomainError(ValueError):
    """A natural parameter left the domain of a log-partition function."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A precision matrix failed its Cholesky factorization."""


class InfeasibleStartError(ValueError):
    """The initial or fixed parameters violate the family constraints."""


class RejectionBudgetError(RuntimeError):
    """Loading-matrix generation could not hit the coherence band."""


class SamplerError(RuntimeError):
    """Gibbs sampling hit a numerically unsafe conditional."""


class SubsampleFailureError(RuntimeError):
    """Too many subsample fits failed during stability selection."""


class ConfigError(ValueError):
    """Invalid command-line configuration."""
