"""Kinetic-inductance-aware design and S21 analysis for superconducting CPW resonators."""

__version__ = "0.1.0"

from .chip import ChipDesign, McResult, ThicknessModel, linear_fit_mse, optimize_geometry, run_monte_carlo, synthesize_s21
from .em import CpwGeometry, Material, TransmissionLineParams, cpw_capacitance, cpw_geometric_inductance, elliptic_k, transmission_line_params
from .errors import ConfigError, ConvergenceError, DataError, DomainError
from .kinetic import kinetic_fraction, kinetic_inductance, kinetic_params, penetration_depth
from .resonator import ResonatorModel, frequency_shift, thickness_sensitivity

__all__ = [
    "ChipDesign", "ConfigError", "ConvergenceError", "CpwGeometry", "DataError", "DomainError", "Material",
    "McResult", "ResonatorModel", "ThicknessModel", "TransmissionLineParams", "cpw_capacitance",
    "cpw_geometric_inductance", "elliptic_k", "frequency_shift", "kinetic_fraction", "kinetic_inductance",
    "kinetic_params", "linear_fit_mse", "optimize_geometry", "penetration_depth", "run_monte_carlo",
    "synthesize_s21", "thickness_sensitivity", "transmission_line_params",
]
