"""Robustness analysis of k-nearest-neighbor vehicle platoons.

Construct P(n, k) platoon graphs with reference-vehicle placements, compute
stability margins, worst-case disturbance gains, and delay margins from
grounded-Laplacian spectra, and validate them against frequency sweeps,
dense eigendecompositions, and constant-delay time-domain simulation.
"""

from .errors import NumericalError, ParameterError
from .topology import (
    GroundedSystem,
    PlatoonTopology,
    ReferenceSet,
    build_platoon,
    ground,
    make_reference_set,
    md_arrangement,
    scenario_from_json,
    scenario_to_json,
)
from .spectral import (
    BoundCertificate,
    FormationSpectrum,
    Spectrum,
    build_formation_matrix,
    certify_lambda_max,
    certify_lambda_min,
    eig_sym,
    eig_sym_bisection,
    map_formation_spectrum,
    spectral_radius_formation,
    stochasticity_defect,
)
from .robustness import (
    FormationDelayMargin,
    FrequencyGrid,
    FrequencyResponse,
    GammaConditions,
    RobustnessReport,
    build_report,
    delay_bounds_k,
    delay_margin_formation,
    delay_margin_velocity,
    gamma_conditions,
    hinf_formation,
    hinf_velocity,
    min_refs_nonexpansive,
    peak_amplitude,
    sweep_hinf,
)
from .dde_sim import (
    DelaySpec,
    NoiseDisturbance,
    SimSystem,
    SinusoidDisturbance,
    StabilityVerdict,
    Trajectory,
    classify,
    formation_system,
    simulate,
    simulate_offdiagonal,
    threshold_scan,
    velocity_system,
)

__version__ = "0.1.0"

__all__ = [
    "BoundCertificate",
    "DelaySpec",
    "FormationDelayMargin",
    "FormationSpectrum",
    "FrequencyGrid",
    "FrequencyResponse",
    "GammaConditions",
    "GroundedSystem",
    "NoiseDisturbance",
    "NumericalError",
    "ParameterError",
    "PlatoonTopology",
    "ReferenceSet",
    "RobustnessReport",
    "SimSystem",
    "SinusoidDisturbance",
    "Spectrum",
    "StabilityVerdict",
    "Trajectory",
    "build_formation_matrix",
    "build_platoon",
    "build_report",
    "certify_lambda_max",
    "certify_lambda_min",
    "classify",
    "delay_bounds_k",
    "delay_margin_formation",
    "delay_margin_velocity",
    "eig_sym",
    "eig_sym_bisection",
    "formation_system",
    "gamma_conditions",
    "ground",
    "hinf_formation",
    "hinf_velocity",
    "make_reference_set",
    "map_formation_spectrum",
    "md_arrangement",
    "min_refs_nonexpansive",
    "peak_amplitude",
    "scenario_from_json",
    "scenario_to_json",
    "simulate",
    "simulate_offdiagonal",
    "spectral_radius_formation",
    "stochasticity_defect",
    "sweep_hinf",
    "threshold_scan",
    "velocity_system",
]
