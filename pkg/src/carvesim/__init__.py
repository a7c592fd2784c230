"""Heralded Bell-state carving of two atoms in a single-sided cavity.

Exact channel evaluation, trajectory Monte Carlo and the analysis toolchain
(parity tomography, Husimi grids, lifetime fits, state detection) behind the
carvesim command-line tool.
"""

from .analysis import (
    CoherenceFit,
    DetectionRates,
    FitFailedError,
    HusimiGrid,
    ParityScan,
    UnderdeterminedScanError,
    bell_fidelity,
    classify,
    confusion_matrix,
    fit_parity,
    gaussian_lifetime_fit,
    husimi_grid,
    husimi_q,
    mollweide,
    parity_closed_form,
    parity_of,
    simulate_detection,
    symmetric_projector,
)
from .cavity import CavityParams, JointAtomPhotonState, ReflectionModel, reflect_photon
from .config import ConfigError, RunConfig, config_hash, load_config
from .protocols import (
    HeraldOutcome,
    MonteCarloResult,
    NeverHeraldsError,
    NoiseModel,
    PreparationSpec,
    ProtocolResult,
    ProtocolSpec,
    PulseConfig,
    carve_step,
    double_carving,
    monte_carlo_run,
    prepare,
    run_protocol,
    scattering_channel,
    scattering_event,
    sigma_for_lifetime,
    single_carving,
    single_carving_eta_ideal,
    single_carving_f_ideal,
    wait_evolution,
)
from .states import (
    BellKind,
    NullBranchError,
    RotationSpec,
    TwoAtomState,
    bell_state,
    bell_vector,
    fidelity,
    global_rotation,
    populations,
    project,
    renormalize,
)

__version__ = "0.1.0"

__all__ = [
    "BellKind",
    "CavityParams",
    "CoherenceFit",
    "ConfigError",
    "DetectionRates",
    "FitFailedError",
    "HeraldOutcome",
    "HusimiGrid",
    "JointAtomPhotonState",
    "MonteCarloResult",
    "NeverHeraldsError",
    "NoiseModel",
    "NullBranchError",
    "ParityScan",
    "PreparationSpec",
    "ProtocolResult",
    "ProtocolSpec",
    "PulseConfig",
    "ReflectionModel",
    "RotationSpec",
    "RunConfig",
    "TwoAtomState",
    "UnderdeterminedScanError",
    "bell_fidelity",
    "bell_state",
    "bell_vector",
    "carve_step",
    "classify",
    "config_hash",
    "confusion_matrix",
    "double_carving",
    "fidelity",
    "fit_parity",
    "gaussian_lifetime_fit",
    "global_rotation",
    "husimi_grid",
    "husimi_q",
    "load_config",
    "mollweide",
    "monte_carlo_run",
    "parity_closed_form",
    "parity_of",
    "populations",
    "prepare",
    "project",
    "reflect_photon",
    "renormalize",
    "run_protocol",
    "scattering_channel",
    "scattering_event",
    "sigma_for_lifetime",
    "simulate_detection",
    "single_carving",
    "single_carving_eta_ideal",
    "single_carving_f_ideal",
    "symmetric_projector",
    "wait_evolution",
]
