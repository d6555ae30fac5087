"""Zeroth-order IRS tuning with an inexact WMMSE beamforming oracle."""
from .channel import ChannelRealization, IrsEnvironment, LinkStats, Scenario, effective_channel, sample_realization
from .irs import IdealIrs, ParameterBox, VaractorCircuit, VaractorIrs, project
from .oracle import OracleBudget, reference_solve, wmmse
from .optimizer import OptimizerConfig, izosga_run, izosga_runs
from .utility import cogradient, sinr, sumrate

__all__ = [
    "ChannelRealization", "IrsEnvironment", "LinkStats", "Scenario", "effective_channel", "sample_realization",
    "IdealIrs", "ParameterBox", "VaractorCircuit", "VaractorIrs", "project",
    "OracleBudget", "reference_solve", "wmmse",
    "OptimizerConfig", "izosga_run", "izosga_runs",
    "cogradient", "sinr", "sumrate",
]
