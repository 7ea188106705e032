"""Large-deviations analysis of credit-pool losses with default-dependent recoveries.

The library computes, for a finite mixture of name types (each a default
probability plus a recovery distribution that may depend on the realized pool
default rate):

* the exponential decay rate of P(pool loss rate >= ell) via a convex
  variational problem (``rate_at``, ``rate_curve``);
* the most likely default rate D*(ell) and the implied effective recovery
  R*(ell) = 1 - ell/D* of the conditioning rare event
  (``effective_recovery_curve``);
* finite-pool Monte Carlo tail estimates, naive and importance-sampled under
  the optimal exponential tilt, plus an exact binomial oracle for degenerate
  recoveries (``tail_naive``, ``tail_tilted``, ``tail_exact_pointmass``);
* the Gibbs-conditioning diagnostic E[D_N | L_N >= ell] (``gibbs_conditional``).

The ``tailrisk`` console script exposes the same operations on pools described
by TOML config files or the built-in presets 1-6.
"""

from .duality import (
    bernoulli_kl,
    bernoulli_kl_prime,
    bernoulli_log_mgf,
    bernoulli_log_mgf_prime,
    legendre_transform,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    InsufficientSamplesError,
    SamplingError,
    TailriskError,
)
from .montecarlo import (
    SimOutcome,
    TailEstimate,
    gibbs_conditional,
    simulate,
    tail_exact_pointmass,
    tail_naive,
    tail_tilted,
)
from .pool import LlnSummary, PoolSpec, TypeSpec, allocate_names, lln, max_loss, preset
from .rates import (
    MultiplierSolution,
    RateCurve,
    RatePoint,
    effective_recovery_curve,
    inner_value,
    rate_at,
    rate_curve,
    solve_multipliers,
)
from .recovery import (
    BetaFamily,
    LossSupport,
    MeanMap,
    PointMass,
    log_mgf,
    log_mgf_prime,
    loss_rate_function,
    mean_loss,
    sample,
    sample_tilted,
    support,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "TailriskError",
    "ConvergenceError",
    "SamplingError",
    "InsufficientSamplesError",
    "ConfigError",
    # convex duality
    "bernoulli_kl",
    "bernoulli_kl_prime",
    "bernoulli_log_mgf",
    "bernoulli_log_mgf_prime",
    "legendre_transform",
    # recovery models
    "MeanMap",
    "PointMass",
    "BetaFamily",
    "LossSupport",
    "mean_loss",
    "log_mgf",
    "log_mgf_prime",
    "loss_rate_function",
    "support",
    "sample",
    "sample_tilted",
    # pools
    "TypeSpec",
    "PoolSpec",
    "LlnSummary",
    "lln",
    "preset",
    "allocate_names",
    "max_loss",
    # rate engine
    "MultiplierSolution",
    "RatePoint",
    "RateCurve",
    "inner_value",
    "solve_multipliers",
    "rate_at",
    "rate_curve",
    "effective_recovery_curve",
    # simulation
    "SimOutcome",
    "TailEstimate",
    "simulate",
    "tail_naive",
    "tail_exact_pointmass",
    "tail_tilted",
    "gibbs_conditional",
]
