"""Short-rate model toolkit: power-transform reduction to a square-root
diffusion, exact transition laws under the transformed measure, and a
statistical verification harness.
"""

from .analysis import (
    KsResult,
    McMomentResult,
    MomentBound,
    gronwall_bound,
    ks_statistic,
    mc_moment,
    mean_rate,
    scale_function,
    scale_function_log_magnitude,
)
from .config import RunConfig, load_config, parse_config
from .distribution import (
    NoncentralChiSq,
    TransitionSpec,
    noncentral_cdf,
    noncentral_pdf,
    noncentral_sample,
    rate_cdf,
    rate_density,
    transition_spec,
)
from .engine import (
    AuxiliaryResult,
    NoiseMatrix,
    Path,
    TimeGrid,
    euler_auxiliary,
    euler_ckls,
    euler_under_q,
    exact_sqrt_level,
    explicit_rate,
    explicit_rate_on_grid,
    sample_cir_exact,
)
from .errors import (
    CklsError,
    ConfigError,
    DegenerateTransform,
    DegenerateWeights,
    DomainError,
    InputError,
    RegimeError,
    SingularSample,
)
from .girsanov import (
    NovikovEstimate,
    WeightedEstimate,
    WeightedPath,
    WeightedSample,
    accumulate_weight,
    drift_adjustment,
    novikov_diagnostic,
    simulate_weighted,
    weighted_expectation,
)
from .params import CklsParams, GirsanovBranch, MomentCase, Regime, classify_regime
from .transform import (
    CirParams,
    Transform,
    default_c,
    derive_cir,
    make_transform,
    transform_eval,
    transform_inverse,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
