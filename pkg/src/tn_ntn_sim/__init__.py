"""Drop-based system-level simulator for an integrated terrestrial / LEO satellite network."""
from .scenario import NtnConfig, Scenario, load_scenario, scenario_from_mapping
from .simulation import run_drops, simulate_drop

__all__ = ["NtnConfig", "Scenario", "load_scenario", "scenario_from_mapping", "run_drops", "simulate_drop"]
__version__ = "0.1.0"
