"""Dynamical cooling of a single trapped atom beyond the Lamb-Dicke regime.

Builds Franck-Condon transition rates for pulsed laser cooling in 1D and 2D
harmonic traps, designs dark-state pulses, and propagates trap populations
through pulse protocols deterministically or by quantum-jump Monte Carlo.
"""

from .dynamics import (Distribution, McEnsembleResult, TimeSeries,
                       mc_ensemble, mc_trajectory, observables,
                       propagate_pulse, run_protocol, thermal_distribution)
from .errors import (ConfigError, DomainError, ResourceLimitError,
                     SimulationError, SingularRatioError, ValidityError)
from .fc import (DarkDesign, FcAmplitude, LambDicke, dark_eta_for_level,
                 dark_ratio_A, fc_factor, fc_row, laguerre_assoc)
from .protocols import (Protocol, RunSpec, ValidationReport,
                        design_excited_protocol, parse_config, preset,
                        preset_runspec, validate_protocol, write_config,
                        PRESET_NAMES)
from .rates import (Pulse, RateMatrix, TrapConfig, angular_quadrature,
                    dipole_pattern, empty_rates_1d, empty_rates_2d,
                    rate_matrix, rate_matrix_1d, rate_matrix_2d)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DarkDesign", "Distribution", "DomainError", "FcAmplitude",
    "LambDicke", "McEnsembleResult", "PRESET_NAMES", "Protocol", "Pulse",
    "RateMatrix", "ResourceLimitError", "RunSpec", "SimulationError",
    "SingularRatioError", "TimeSeries", "TrapConfig", "ValidationReport",
    "ValidityError", "angular_quadrature", "dark_eta_for_level",
    "dark_ratio_A", "design_excited_protocol", "dipole_pattern",
    "empty_rates_1d", "empty_rates_2d", "fc_factor", "fc_row",
    "laguerre_assoc", "mc_ensemble", "mc_trajectory", "observables",
    "parse_config", "preset", "preset_runspec", "propagate_pulse",
    "rate_matrix", "rate_matrix_1d", "rate_matrix_2d", "run_protocol",
    "thermal_distribution", "validate_protocol", "write_config",
]
