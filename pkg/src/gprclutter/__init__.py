"""Clutter covariance propagation for single-snapshot FDA-MIMO GPR.

Implements the chain from weak Cole-Cole parameter fluctuations through
electromagnetic contrast and first-order Born channel snapshots to the
clutter covariance and its spectral/subspace diagnostics, plus the Monte
Carlo machinery that validates each link at desk scale.
"""

from .constants import EPSILON_0, MU_0
from .constitutive import (
    ColeColeParams,
    ComplexPermittivity,
    SensitivityVector,
    eval_permittivity,
    eval_sensitivities,
    exact_contrast,
    finite_difference_check,
    linear_contrast,
)
from .forward import (
    ForwardMatrix,
    SteeringVector,
    assemble_forward,
    forward_discrepancy,
    green_kernel,
    steering_vector,
)
from .montecarlo import (
    ClosureReport,
    ValidityReport,
    closure_report,
    simulate_snapshots,
    validity_scan,
)
from .randfield import (
    PerturbationCovariance,
    build_covariance,
    build_param_factor,
    build_spatial_factor,
    materialize_full,
    sample_perturbations,
)
from .scene import (
    GeometryConfig,
    Scenario,
    SceneGeometry,
    build_default_geometry,
    get_scenario,
    scenario_registry,
)
from .spectra import (
    ClutterCovariance,
    SpectralSummary,
    add_noise_floor,
    clutter_covariance,
    modal_decomposition,
    scale_covariance,
    spectral_summary,
    target_overlap,
)

__version__ = "0.1.0"

__all__ = [
    "EPSILON_0",
    "MU_0",
    "ColeColeParams",
    "ComplexPermittivity",
    "SensitivityVector",
    "eval_permittivity",
    "eval_sensitivities",
    "exact_contrast",
    "finite_difference_check",
    "linear_contrast",
    "ForwardMatrix",
    "SteeringVector",
    "assemble_forward",
    "forward_discrepancy",
    "green_kernel",
    "steering_vector",
    "ClosureReport",
    "ValidityReport",
    "closure_report",
    "simulate_snapshots",
    "validity_scan",
    "PerturbationCovariance",
    "build_covariance",
    "build_param_factor",
    "build_spatial_factor",
    "materialize_full",
    "sample_perturbations",
    "GeometryConfig",
    "Scenario",
    "SceneGeometry",
    "build_default_geometry",
    "get_scenario",
    "scenario_registry",
    "ClutterCovariance",
    "SpectralSummary",
    "add_noise_floor",
    "clutter_covariance",
    "modal_decomposition",
    "scale_covariance",
    "spectral_summary",
    "target_overlap",
    "__version__",
]
