"""Energy-optimal radio resource allocation for URLLC downlinks.

Solves for the transmit-power caps, per-user bandwidths and active-antenna
count that minimize a base station's average total power under end-to-end
delay and reliability constraints, and validates the solved policy with a
frame-level fading/queueing Monte-Carlo simulator.
"""

__version__ = "0.1.0"

from .model import (Allocation, ConfigError, PowerInfeasibleError, QosBudget,
                    QosInfeasibleError, SystemConfig, UserProfile,
                    path_loss_gain, validate_config)
from .rate import (SnrRequirementCoeffs, achievable_rate, channel_dispersion,
                   inv_gaussian_q, required_snr, snr_coeffs)
from .traffic import EffectiveBandwidth, effective_bandwidth, queueing_constraint_met
from .fading import (GainThreshold, drop_bound_F, drop_prob_B, gain_cdf,
                     gain_pdf, mean_tx_power, solve_gain_threshold)
from .allocator import (BandwidthSolution, YFunction, allocate_bandwidth,
                        build_y_functions, find_bandwidth_minimizer,
                        optimal_antennas, power_thresholds,
                        sign_structure_witness, solve_allocation,
                        y_derivatives, y_value)
from .simulator import (QueueState, SimPolicy, SimReport, draw_channel_gain,
                        run_simulation, step_queue)
from .config_io import DEFAULT_CONFIG_TEXT, load_config, parse_config_text
from .experiments import ExperimentSpec, place_users, run_experiment

__all__ = [
    "Allocation", "BandwidthSolution", "ConfigError", "DEFAULT_CONFIG_TEXT",
    "EffectiveBandwidth", "ExperimentSpec", "GainThreshold",
    "PowerInfeasibleError", "QosBudget", "QosInfeasibleError", "QueueState",
    "SimPolicy", "SimReport", "SnrRequirementCoeffs", "SystemConfig",
    "UserProfile", "YFunction", "achievable_rate", "allocate_bandwidth",
    "build_y_functions", "channel_dispersion", "draw_channel_gain",
    "drop_bound_F", "drop_prob_B", "effective_bandwidth",
    "find_bandwidth_minimizer", "gain_cdf", "gain_pdf", "inv_gaussian_q",
    "load_config", "mean_tx_power", "optimal_antennas", "parse_config_text",
    "path_loss_gain", "place_users", "power_thresholds",
    "queueing_constraint_met", "required_snr", "run_experiment",
    "run_simulation", "sign_structure_witness", "snr_coeffs",
    "solve_allocation", "step_queue", "validate_config", "y_derivatives",
    "y_value",
]
