"""Nested SGDA training of one-layer generators with invertible-region activations."""

from .activations import ActivationSpec
from .bpsgd import BpsgdSchedule, biased_projected_sgd
from .config import ExperimentConfig, random_spd_target
from .discriminator import (
    DiscriminatorParams,
    discriminator_output,
    hessian_probe,
    optimal_discriminator,
    pair_gradient,
    quadratic_score,
    symmetric_subspace_max_eigenvalue,
    two_sample_loss,
)
from .errors import (
    ConfigError,
    ConvergenceFailure,
    InsufficientInRegionSamples,
    NestganError,
    NotPositiveDefinite,
    OutsideInvertibleRegion,
    Singular,
)
from .metrics import (
    MetricRecord,
    fd_gradient_check,
    fosp_residual,
    gaussian_kl,
    pinsker_tv,
    surrogate_tv,
    virtual_criterion,
)
from .model import (
    GeneratorParams,
    TargetSpec,
    estimate_region_mass,
    sample_p,
    sample_target,
    whitening_transform,
)
from .projections import (
    ProjectionSets,
    project_discriminator,
    project_generator,
    project_generator_matrix,
    sample_generator_point,
    verify_containment,
)
from .rng import RngStream, sample_std_normal
from .sga import SgaSchedule, sga_discriminator, sga_discriminator_reference
from .training import (
    TrainReport,
    TrainSettings,
    generator_gradient,
    generator_loss,
    nested_sgda,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec",
    "BpsgdSchedule",
    "ConfigError",
    "ConvergenceFailure",
    "DiscriminatorParams",
    "ExperimentConfig",
    "GeneratorParams",
    "InsufficientInRegionSamples",
    "MetricRecord",
    "NestganError",
    "NotPositiveDefinite",
    "OutsideInvertibleRegion",
    "ProjectionSets",
    "RngStream",
    "SgaSchedule",
    "Singular",
    "TargetSpec",
    "TrainReport",
    "TrainSettings",
    "biased_projected_sgd",
    "discriminator_output",
    "estimate_region_mass",
    "fd_gradient_check",
    "fosp_residual",
    "gaussian_kl",
    "generator_gradient",
    "generator_loss",
    "hessian_probe",
    "nested_sgda",
    "optimal_discriminator",
    "pair_gradient",
    "pinsker_tv",
    "project_discriminator",
    "project_generator",
    "project_generator_matrix",
    "quadratic_score",
    "random_spd_target",
    "sample_generator_point",
    "sample_p",
    "sample_std_normal",
    "sample_target",
    "sga_discriminator",
    "sga_discriminator_reference",
    "surrogate_tv",
    "symmetric_subspace_max_eigenvalue",
    "two_sample_loss",
    "verify_containment",
    "virtual_criterion",
    "whitening_transform",
]
