"""Learning polynomial log-densities from truncated samples and extrapolating
them to the whole unit cube."""

from .basis import (
    MonomialBasis,
    MultiIndex,
    PolyCoeffs,
    coeff_l1_bound,
    enumerate_basis,
    eval_poly,
    monomial_profile,
    multi_index_factorial,
    poly_sup_norm,
)
from .density import (
    LogDensity,
    TruncatedDensity,
    cdf_1d,
    kl_divergence,
    log_partition,
    pdf,
    taylor_log_density,
    taylor_polynomial,
    tv_distance,
)
from .integrate import QuadratureSpec, SurvivalSet, estimate_volume, integrate_box, integrate_set
from .mle import (
    FitConfig,
    FitReport,
    kl_objective,
    load_fit_config,
    population_gradient,
    population_hessian,
    population_mle_1d,
    project_onto_D,
    psgd_fit,
    stochastic_gradient,
)
from .sampler import SamplerStats, SamplingError, sample_exp_family, sample_target, sample_uniform_set

__version__ = "0.1.0"
