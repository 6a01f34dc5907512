"""Numerical laboratory for the capacity pre-log of noncoherent SIMO
correlated block-fading channels.

The package computes exact pre-log values, plans the pilot/row selection
that makes blind recovery a square linear problem, verifies the Jacobian
factorization and its nonvanishing witness, runs noise-free recovery
round trips, and estimates mutual-information slopes by Monte Carlo.
"""
from .capacity import (
    MiEstimate,
    ResourceBudgetError,
    SlopeFit,
    cond_entropy_rate_mc,
    mi_rate_mc,
    prelog_slope_fit,
    snr_db_to_linear,
    upper_bound_rate,
)
from .jacobian import (
    JacobianFactors,
    LogDetProbe,
    SparkViolationError,
    WitnessCheck,
    WitnessDrawError,
    WitnessSets,
    a_vectors,
    det_j2_homogeneity_degree,
    jacobian_factors,
    map_g,
    mc_expected_log_abs_det_j2,
    verify_witness_factorization,
    witness_sets,
)
from .kernels import backend_name
from .model import (
    ChannelConfig,
    ChannelState,
    CovarianceFactor,
    RxBlock,
    TxBlock,
    channel_apply,
    expand_channel,
    load_covariance,
    load_vector,
    make_dft_covariance,
    make_random_covariance,
    noiseless_output,
    sample_channel_state,
    sample_input_iid_gaussian,
    save_covariance,
    save_vector,
)
from .recovery import (
    DegenerateSystemError,
    NearZeroSymbolError,
    RecoveryResult,
    RecoverySystem,
    build_homogeneous_system,
    build_recovery_system,
    recover_least_squares,
    recover_noiseless,
)
from .seeding import complex_normal, substream
from .structure import (
    IndexPlan,
    PrelogReport,
    PropertyAPrimeReport,
    PropertyAReport,
    Regime,
    SubsetBudgetError,
    build_index_plan,
    check_property_a,
    check_property_a_prime,
    critical_antennas,
    prelog,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelConfig",
    "CovarianceFactor",
    "ChannelState",
    "TxBlock",
    "RxBlock",
    "make_dft_covariance",
    "make_random_covariance",
    "sample_channel_state",
    "sample_input_iid_gaussian",
    "expand_channel",
    "noiseless_output",
    "channel_apply",
    "save_covariance",
    "load_covariance",
    "save_vector",
    "load_vector",
    "Regime",
    "PrelogReport",
    "IndexPlan",
    "PropertyAReport",
    "PropertyAPrimeReport",
    "SubsetBudgetError",
    "prelog",
    "critical_antennas",
    "build_index_plan",
    "check_property_a",
    "check_property_a_prime",
    "JacobianFactors",
    "WitnessSets",
    "WitnessCheck",
    "LogDetProbe",
    "SparkViolationError",
    "WitnessDrawError",
    "map_g",
    "a_vectors",
    "jacobian_factors",
    "det_j2_homogeneity_degree",
    "witness_sets",
    "verify_witness_factorization",
    "mc_expected_log_abs_det_j2",
    "RecoverySystem",
    "RecoveryResult",
    "DegenerateSystemError",
    "NearZeroSymbolError",
    "build_recovery_system",
    "recover_noiseless",
    "recover_least_squares",
    "build_homogeneous_system",
    "MiEstimate",
    "SlopeFit",
    "ResourceBudgetError",
    "snr_db_to_linear",
    "cond_entropy_rate_mc",
    "upper_bound_rate",
    "mi_rate_mc",
    "prelog_slope_fit",
    "backend_name",
    "substream",
    "complex_normal",
]
