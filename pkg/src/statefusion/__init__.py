"""Recursive state estimation and sensor fusion.

Linear and nonlinear Kalman-family filters, interacting multiple models,
particle filtering, correlation-aware fusion (covariance intersection and
split-covariance variants), Gaussian-mixture PHD multi-target tracking, and
continuous-time observers with integrated state-feedback control.
"""

from .statespace import (
    GaussianEstimate,
    LinearStateSpace,
    LinearMeasurementModel,
    NonlinearSystemModel,
    NonlinearMeasurementModel,
    check_covariance,
    discretize,
    observability_matrix,
    is_observable,
    pole_placement_gain,
    observer_gain,
)
from .models import model_library
from .kalman import (
    ConstantGain,
    alpha_beta_gain,
    alpha_beta_gamma_gain,
    constant_gain_update,
    fuse_full,
    kf_predict,
    kf_update,
)
from .nonlinear import (
    SigmaPointSet,
    UkfConfig,
    ckf_step,
    cubature_points,
    ekf_predict,
    ekf_update,
    ukf_step,
    ut_sigma_points,
)
from .imm import ImmBank, imm_mix, imm_step, imm_weight_update
from .particle import (
    ParticleSet,
    ProposalModel,
    effective_sample_size,
    pf_step,
    resample,
    sis_step,
)
from .fusion import (
    ConsistencyReport,
    SplitEstimate,
    ci_fuse,
    circular_reasoning_demo,
    consistency_audit,
    federated_expand,
    fuse_known_correlation,
    golden_section_w,
    imf_fuse,
    split_cif_fuse,
    split_cif_partial,
)
from .mtt import (
    DetectionSet,
    GaussianMixture,
    PhdConfig,
    pda_update,
    phd_extract,
    phd_predict,
    phd_prune_merge,
    phd_update,
)
from .continuous import (
    ContinuousEstimatorState,
    augmented_stability,
    integrated_control_step,
    kalman_bucy_step,
    luenberger_step,
    riccati_stationary,
)
from .scenarios import (
    ConfigError,
    ScenarioConfig,
    ScenarioFailure,
    TraceRecord,
    available_scenarios,
    load_config,
    run_scenario,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "GaussianEstimate",
    "LinearStateSpace",
    "LinearMeasurementModel",
    "NonlinearSystemModel",
    "NonlinearMeasurementModel",
    "check_covariance",
    "discretize",
    "observability_matrix",
    "is_observable",
    "pole_placement_gain",
    "observer_gain",
    "model_library",
    "ConstantGain",
    "alpha_beta_gain",
    "alpha_beta_gamma_gain",
    "constant_gain_update",
    "fuse_full",
    "kf_predict",
    "kf_update",
    "SigmaPointSet",
    "UkfConfig",
    "ckf_step",
    "cubature_points",
    "ekf_predict",
    "ekf_update",
    "ukf_step",
    "ut_sigma_points",
    "ImmBank",
    "imm_mix",
    "imm_step",
    "imm_weight_update",
    "ParticleSet",
    "ProposalModel",
    "effective_sample_size",
    "pf_step",
    "resample",
    "sis_step",
    "ConsistencyReport",
    "SplitEstimate",
    "ci_fuse",
    "circular_reasoning_demo",
    "consistency_audit",
    "federated_expand",
    "fuse_known_correlation",
    "golden_section_w",
    "imf_fuse",
    "split_cif_fuse",
    "split_cif_partial",
    "DetectionSet",
    "GaussianMixture",
    "PhdConfig",
    "pda_update",
    "phd_extract",
    "phd_predict",
    "phd_prune_merge",
    "phd_update",
    "ContinuousEstimatorState",
    "augmented_stability",
    "integrated_control_step",
    "kalman_bucy_step",
    "luenberger_step",
    "riccati_stationary",
    "ConfigError",
    "ScenarioConfig",
    "ScenarioFailure",
    "TraceRecord",
    "available_scenarios",
    "load_config",
    "run_scenario",
    "validate_config",
]
