"""Demand-response market game: equilibria, externality incentives and evolutionary dynamics."""

from .equilibrium import EquilibriumResult, SolverError, nash_equilibrium, social_optimum
from .market import DemandProfile, DomainError, PriceModel, Scenario, ValuationParams
from .scenario_io import default_scenario, load_scenario

__all__ = [
    "DemandProfile",
    "DomainError",
    "EquilibriumResult",
    "PriceModel",
    "Scenario",
    "SolverError",
    "ValuationParams",
    "default_scenario",
    "load_scenario",
    "nash_equilibrium",
    "social_optimum",
]
