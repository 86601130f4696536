"""Simulator and calibrator for optically gated photoconductive microwave switches."""

from .calibration import (
    CalibrationDataset,
    DataPoint,
    FitResult,
    ParameterVector,
    builtin_paper_dataset,
    fit,
    identifiability,
    objective,
    synthesize_dataset,
)
from .device import (
    SwitchInstance,
    SwitchModel,
    SwitchResult,
    extinction_ratio,
    phase_shift,
    power_sweep,
    simulate_circuit,
)
from .netlist import CASCADE_NETLIST, NetlistAst, NetlistError, format_netlist, parse_netlist
from .optical_network import NetworkError, OpticalGraph, build_network, propagate
from .photoconductor import MaterialParams, ParasiticParams, PatchGeometry, patch_impedance
from .rf_network import FrequencyGrid, SParameters, TwoPortABCD, abcd_to_s, cascade, s_to_abcd

__version__ = "0.1.0"
