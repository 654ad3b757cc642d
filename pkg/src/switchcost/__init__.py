"""Oligopoly price competition with consumer switching costs.

Demand, best responses, equilibria and comparative statics for firms whose
customers arrive at one firm, see every price and valuation, and pay a
switching cost to buy elsewhere.
"""
from ._accel import USE_NUMBA
# ``demand`` itself stays reachable as switchcost.demand.demand; re-exporting it
# here would shadow the submodule.
from .demand import (
    cross_partial,
    demand_breakdown,
    demand_discriminatory,
    derivative_bundle,
    dfoc_ds,
    dfoc_ds_fd,
    exit_mass,
    foc,
    foc_jacobian,
    foc_own,
    foc_switch,
    foc_vector,
    profit,
    soc,
    switch_cutoff,
)
from .distributions import ConditionEntry, DomainError, ValuationDistribution, check_conditions
from .market import MarketConfig, PriceProfile, ValidationError, load_scenario, validate
from .oracle import DemandBreakdown, FirmDemand, consumer_choice, mc_demand
from .quadrature import QuadratureError
from .regions import RegionGrid, marginal_factors, region_grid, region_masses
from .solver import (
    ComparativeStaticsResult,
    DegenerateEquilibrium,
    EquilibriumResult,
    SolverOptions,
    best_response,
    check_stability,
    comparative_statics,
    extremal_equilibria,
    solve_equilibrium,
    stability_from_jacobian,
    uniqueness_diagnostic,
)

__version__ = "0.1.0"
