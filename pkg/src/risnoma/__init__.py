"""Joint active beamforming, NOMA power allocation and RIS phase design for
integrated sensing and communication."""
from .algorithms import run_iao, run_ibcd
from .baselines import SchemeId, baseline_mrt, baseline_zf, ris_isac_no_noma, ris_sensing
from .config import ScenarioConfig, config_from_dict, load_config
from .errors import (ConfigError, DegenerateChannel, InfeasibleScenario, InvalidArgument,
                     NeedsInitialization, SolverFailure)
from .geometry import generate_channels, sample_user_positions
from .harness import ExperimentResult, run_cell, run_sweep, scenario
from .metrics import Solution, achievable_rates, build_sensing_spec, min_beampattern

__version__ = "0.1.0"

__all__ = [
    "run_iao", "run_ibcd", "SchemeId", "baseline_mrt", "baseline_zf", "ris_isac_no_noma", "ris_sensing",
    "ScenarioConfig", "config_from_dict", "load_config", "ConfigError", "DegenerateChannel",
    "InfeasibleScenario", "InvalidArgument", "NeedsInitialization", "SolverFailure",
    "generate_channels", "sample_user_positions", "ExperimentResult", "run_cell", "run_sweep", "scenario",
    "Solution", "achievable_rates", "build_sensing_spec", "min_beampattern",
]
