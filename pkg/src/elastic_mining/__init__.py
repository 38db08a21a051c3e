"""Selfish mining under elastic hash supply."""

from .equilibrium import (
    EquilibriumOutcome,
    MarketParams,
    RushingOutcome,
    Stability,
    Verdict,
    alpha_max,
    baseline_equilibrium,
    collapse_threshold,
    m_max,
    profit_no_attack,
    profit_under_attack,
    rushing_equilibria,
    rushing_profit,
    solve_equilibria,
)
from .errors import DataError, DomainError, PreconditionError
from .mining_model import (
    AttackConfig,
    RevenueShares,
    attack_advantage,
    effective_power_fraction,
    revenue_shares,
)
from .simulation import (
    Basin,
    DynamicsConfig,
    SimConfig,
    SimResult,
    Terminal,
    Trajectory,
    classify_basin,
    simulate_selfish_mining,
    simulate_supply_dynamics,
)

__version__ = "0.1.0"
