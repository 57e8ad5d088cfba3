"""Analog-accumulation crossbar accelerator modeling suite."""

__version__ = "0.1.0"

from .dataflow import (  # noqa: F401
    ComponentEnergyModel,
    DataflowConfig,
    StrategyReport,
    adc_resolution,
    compare_strategies,
    energy_estimate,
    latency_cycles,
    n_conversions,
    strategy_b_feasibility,
)
