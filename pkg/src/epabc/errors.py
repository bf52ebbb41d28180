"""Exception types shared across the package."""


class EpabcError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(EpabcError):
    """A matrix that must be SPD failed Cholesky even after jitter."""


class DimensionMismatch(EpabcError):
    pass


class InvalidAlpha(EpabcError):
    """Damping factor outside (0, 1]."""


class DomainError(EpabcError):
    """Argument outside the legal domain of a transform or function."""


class DimensionTooLarge(EpabcError):
    """More Halton dimensions requested than precomputed prime bases."""


class TableExhausted(EpabcError):
    """A single request exceeded the quasi-Monte Carlo table length."""


class ZeroAcceptance(EpabcError):
    """No simulated pair satisfied the acceptance kernel within the draw cap."""


class AbortedOnFailure(EpabcError):
    """A site update failed and the failure policy is 'abort'."""


class TooManySkips(EpabcError):
    """Every site in a full pass was skipped."""


class InvalidBlockLength(EpabcError):
    pass


class NonStationary(EpabcError):
    """Latent AR(1) has |rho| >= 1, so no stationary initial law exists."""


class SingularProjection(EpabcError):
    """Projected cavity covariance A Sigma A^t is not invertible."""


class EmptyHybridSample(EpabcError):
    """A site retained no positive-weight draws for marginal correction."""


class StuckChain(EpabcError):
    """MCMC-ABC accepted nothing over its initial window."""


class NonFinite(EpabcError):
    """A log-density evaluation overflowed or produced NaN."""


class IncompatibleRuns(EpabcError):
    """Run comparison requested across different models or too few runs."""


class ConfigError(EpabcError):
    """Experiment configuration is missing, malformed, or has unknown fields."""
