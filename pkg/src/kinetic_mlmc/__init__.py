"""Particle Monte Carlo for a two-speed kinetic model in diffusive scaling.

The package provides an unconditionally stable transport-diffusion-collision
particle scheme, couplings between time-step resolutions that preserve both
marginal laws, streaming statistics, closed-form moment oracles, an adaptive
multilevel Monte Carlo driver, and experiment front ends (CLI and HTTP).
"""

from .coupling import coupled_path_pair
from .errors import (
    BudgetError,
    ConfigError,
    KineticMlmcError,
    ParameterError,
    StabilityError,
)
from .mlmc import (
    AdaptiveConfig,
    MlmcReport,
    allocate_samples,
    build_hierarchy,
    classical_equivalent,
    run_adaptive,
    telescopic_combine,
)
from .model import ParticleState, SchemeParams, make_params, simulate_path
from .oracle import MomentQuery, exact_second_moment, heat_limit_moment

__version__ = "0.1.0"

__all__ = [
    "AdaptiveConfig",
    "BudgetError",
    "ConfigError",
    "KineticMlmcError",
    "MlmcReport",
    "MomentQuery",
    "ParameterError",
    "ParticleState",
    "SchemeParams",
    "StabilityError",
    "allocate_samples",
    "build_hierarchy",
    "classical_equivalent",
    "coupled_path_pair",
    "exact_second_moment",
    "heat_limit_moment",
    "make_params",
    "run_adaptive",
    "simulate_path",
    "telescopic_combine",
    "__version__",
]
