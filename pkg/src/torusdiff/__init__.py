"""Circular and toroidal diffusions with closed-form transition densities.

Exact simulation, likelihood inference and bridge sampling for diffusions
whose stationary law is a prescribed density on the circle or torus, plus
a circular Cauchy-driven jump process.
"""

__version__ = "0.1.0"

from .bridge import BridgeSpec, bridge_marginal_density, sample_bridge, sample_bridges, winding_distribution
from .circular import (
    CircularDensity, SpectralDensity, Uniform, VonMises, VonMisesMixture, WrappedCauchy, density_from_dict,
)
from .diffusion import (
    DiffusionModel, PathSample, TransitionKernel, sde_coefficients, simulate_euler, simulate_exact,
    simulate_paths, transition_density,
)
from .estimators import CircularDiffusion
from .exceptions import ConvergenceError, DomainError, SingularityError
from .experiments import (
    ExperimentConfig, ExperimentReport, run_chisq_calibration, run_experiment, run_homogeneity_table,
    run_normality_diagnostic, run_rejection_rates,
)
from .inference import (
    FitResult, ParamVector, TestResult, fisher_information, fit_mle, get_family, log_likelihood, lr_test, score,
)
from .ingest import IngestReport, TrackData, ingest_tracks
from .jump import (
    JumpModel, jump_transition_density, sample_auxiliary, sample_jump_bridge, simulate_jump_path,
    simulate_jump_paths,
)
from .multisample import (
    PRESETS, GroupedSample, LinearHypothesis, change_point_test, fit_groups, fit_restricted, lr_test_linear,
    preset_matrix,
)
from .toroidal import (
    BivariateVonMises, CovarianceSpec, ProductDensity, ToroidalDensity, ToroidalMixture, UniformTorus, blended,
    toroidal_from_dict,
)

__all__ = [
    "BivariateVonMises", "BridgeSpec", "CircularDensity", "CircularDiffusion", "ConvergenceError",
    "CovarianceSpec", "DiffusionModel", "DomainError", "ExperimentConfig", "ExperimentReport", "FitResult",
    "GroupedSample", "IngestReport", "JumpModel", "LinearHypothesis", "PRESETS", "ParamVector", "PathSample",
    "ProductDensity", "SingularityError", "SpectralDensity", "TestResult", "ToroidalDensity", "ToroidalMixture",
    "TrackData", "TransitionKernel", "Uniform", "UniformTorus", "VonMises", "VonMisesMixture", "WrappedCauchy",
    "blended", "bridge_marginal_density", "change_point_test", "density_from_dict", "fisher_information",
    "fit_groups", "fit_mle", "fit_restricted", "get_family", "ingest_tracks", "jump_transition_density",
    "log_likelihood", "lr_test", "lr_test_linear", "preset_matrix", "run_chisq_calibration", "run_experiment",
    "run_homogeneity_table", "run_normality_diagnostic", "run_rejection_rates", "sample_auxiliary",
    "sample_bridge", "sample_bridges", "sample_jump_bridge", "score", "sde_coefficients", "simulate_euler",
    "simulate_exact", "simulate_jump_path", "simulate_jump_paths", "simulate_paths", "toroidal_from_dict",
    "transition_density", "winding_distribution",
]
