"""Monte-Carlo pricing, CVA and GKW hedging for interacting default intensities."""

from ._cvahedge import (
    ConfigError,
    EstimatorError,
    Scenario,
    SimulationError,
    cds_constant_intensity,
    cva,
    load_scenario,
    oracle,
    parse_scenario,
    price,
    run,
    simulate,
)

__all__ = [
    "ConfigError",
    "EstimatorError",
    "Scenario",
    "SimulationError",
    "cds_constant_intensity",
    "cva",
    "load_scenario",
    "oracle",
    "parse_scenario",
    "price",
    "run",
    "simulate",
]
