"""Repeated games with private monitoring and a public encoder.

Modules:
    game_model          stage games, monitoring structures, entropies, typicality
    monitoring_graph    confusability graphs and minimal colorings
    info_constraint     the rate R* and the constraint R* < log2|S_0|
    equilibrium_region  min-max levels, grid sweeps, hulls
    avs_codec_sim       the resilient public code and its error simulator
    repeated_game_sim   block play with tests and punishment
    cli                 command-line front end
"""

from .game_model import (
    DeviationSpec,
    GameSpecError,
    MonitoringStructure,
    ProductDistribution,
    StageGame,
    expected_utility,
    noisy_binary_monitoring,
    pd_instance,
    prisoners_dilemma,
    validate_game,
)
from .info_constraint import compute_rstar, in_constraint_set, pd_closed_form
from .equilibrium_region import minmax_levels, sweep_region
from .avs_codec_sim import build_code, decode, encode, estimate_error_probability
from .repeated_game_sim import SimConfig, epsilon_equilibrium_check, run_match

__version__ = "0.1.0"

__all__ = [
    "DeviationSpec", "GameSpecError", "MonitoringStructure", "ProductDistribution", "StageGame",
    "expected_utility", "noisy_binary_monitoring", "pd_instance", "prisoners_dilemma", "validate_game",
    "compute_rstar", "in_constraint_set", "pd_closed_form", "minmax_levels", "sweep_region",
    "build_code", "decode", "encode", "estimate_error_probability", "SimConfig",
    "epsilon_equilibrium_check", "run_match", "__version__",
]
