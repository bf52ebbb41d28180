"""Likelihood-free Bayesian inference by expectation propagation.

The approximating family is Gaussian; each likelihood factor's contribution
is estimated by simulating data chunks under an acceptance kernel, so only a
forward simulator of the model is required.  The package bundles the
simulators, a recycling scheme for IID factors, quasi-Monte Carlo parameter
draws, evidence estimation, composite-likelihood blocking for hidden Markov
models, marginal corrections, and a random-walk ABC baseline.
"""

from .engine import EPConfig, EPState, Site, TraceRow, UpdateOutcome, log_evidence, run_ep, update_site
from .gauss import (
    MomentGaussian,
    NaturalGaussian,
    combine,
    damped_site,
    log_partition,
    std_normal_inverse_cdf,
    to_moments,
    to_natural,
)
from .moments import (
    BasicMomentOracle,
    MomentEstimate,
    ParticlePool,
    QmcTable,
    RecycledMomentOracle,
    SamplingConfig,
    SiteTarget,
    ball_log_volume,
    ess,
    estimate_moments_basic,
    estimate_moments_recycled,
    gaussian_draws,
    halton,
    qmc_gaussian_draws,
)

__version__ = "0.1.0"
