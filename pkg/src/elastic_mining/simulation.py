"""Monte Carlo oracle for selfish-mining revenue and a supply-dynamics simulator.

:func:`simulate_selfish_mining` plays the Eyal-Sirer withholding strategy block
by block and counts which discoveries end up in the main chain. It shares no
code with the closed forms in :mod:`elastic_mining.mining_model`.

:func:`simulate_supply_dynamics` lets honest hash rate respond to its profit,
``H <- H * exp(eta * U(H) / C)``, to check which equilibrium a starting point
ends in.
"""

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .equilibrium import MarketParams, profit_under_attack, solve_equilibria
from .errors import DomainError, PreconditionError
from .mining_model import check_domain

_MASK64 = (1 << 64) - 1
_CHUNK = 1 << 16


def splitmix64(x):
    """One round of the splitmix64 output mix on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def replica_seed(seed, index):
    return splitmix64(splitmix64(seed & _MASK64) ^ index)


@dataclass(frozen=True)
class SimConfig:
    alpha: float
    gamma: float
    num_blocks: int = 1_000_000
    replicas: int = 64
    seed: int = 0

    def __post_init__(self):
        check_domain(self.alpha, self.gamma)
        if self.num_blocks < 1:
            raise DomainError("num_blocks must be at least 1")
        if self.replicas < 1:
            raise DomainError("replicas must be at least 1")
        if not 0 <= self.seed <= _MASK64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def blocks_per_replica(self, index):
        base, extra = divmod(self.num_blocks, self.replicas)
        return base + (1 if index < extra else 0)


@dataclass(frozen=True)
class ReplicaCounts:
    pool_blocks: int
    honest_blocks: int
    orphaned: int
    discoveries: int
    max_lead: int


@dataclass(frozen=True)
class SimResult:
    """Per-discovery reward rates in units of the block reward."""

    pool_reward_rate: float
    pool_reward_se: float
    honest_reward_rate: float
    honest_reward_se: float
    main_chain_fraction: float
    total_discoveries: int
    pool_blocks: int
    honest_blocks: int
    orphaned: int
    replicas: int


def run_replica(alpha, gamma, num_blocks, seed):
    """Play ``num_blocks`` discoveries of selfish mining; return block fates."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pool = honest = orphaned = 0
    lead = 0
    max_lead = 0
    tie = False  # two competing one-block branches are public

    remaining = num_blocks
    while remaining > 0:
        n = min(remaining, _CHUNK)
        remaining -= n
        by_pool = (rng.random(n) < alpha).tolist()
        on_pool = (rng.random(n) < gamma).tolist()
        for attacker_found, joins_pool in zip(by_pool, on_pool):
            if attacker_found:
                if tie:
                    # pool extends its own branch and publishes: both its blocks win
                    pool += 2
                    orphaned += 1
                    tie = False
                else:
                    lead += 1
                    if lead > max_lead:
                        max_lead = lead
            elif tie:
                if joins_pool:
                    pool += 1
                    honest += 1
                else:
                    honest += 2
                orphaned += 1
                tie = False
            elif lead == 0:
                honest += 1
            elif lead == 1:
                lead = 0
                tie = True
            elif lead == 2:
                pool += 2
                orphaned += 1
                lead = 0
            else:
                # publish one block to match; it will end up in the main chain
                pool += 1
                orphaned += 1
                lead -= 1
            if lead < 0:
                raise AssertionError("private lead went negative")

    discoveries = num_blocks
    # Flush: the pool publishes its private branch, and an open race is played out.
    pool += lead
    lead = 0
    while tie:
        discoveries += 1
        if rng.random() < alpha:
            pool += 2
        elif rng.random() < gamma:
            pool += 1
            honest += 1
        else:
            honest += 2
        orphaned += 1
        tie = False

    if pool + honest + orphaned != discoveries:
        raise AssertionError("block accounting does not balance")
    return ReplicaCounts(pool, honest, orphaned, discoveries, max_lead)


def _replica_job(args):
    return run_replica(*args)


def simulate_selfish_mining(cfg, workers=None):
    """Estimate per-discovery reward rates by Monte Carlo.

    Parameters
    ----------
    cfg : SimConfig
        ``num_blocks`` discoveries in total, split evenly across ``replicas``.
    workers : int, optional
        Run replicas in this many processes. The result does not depend on it.

    Returns
    -------
    SimResult
        Pooled rates with standard errors from the spread of per-replica rates
        (``nan`` when there is a single replica).
    """
    jobs = [
        (cfg.alpha, cfg.gamma, cfg.blocks_per_replica(i), replica_seed(cfg.seed, i))
        for i in range(cfg.replicas)
        if cfg.blocks_per_replica(i) > 0
    ]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_replica_job, jobs))
    else:
        counts = [_replica_job(job) for job in jobs]
    return _merge(counts)


def _merge(counts):
    pool = sum(c.pool_blocks for c in counts)
    honest = sum(c.honest_blocks for c in counts)
    orphaned = sum(c.orphaned for c in counts)
    total = sum(c.discoveries for c in counts)

    pool_rates = np.array([c.pool_blocks / c.discoveries for c in counts])
    honest_rates = np.array([c.honest_blocks / c.discoveries for c in counts])
    if len(counts) > 1:
        root_n = math.sqrt(len(counts))
        pool_se = float(np.std(pool_rates, ddof=1)) / root_n
        honest_se = float(np.std(honest_rates, ddof=1)) / root_n
    else:
        pool_se = honest_se = math.nan

    pool_rate = pool / total
    honest_rate = honest / total
    return SimResult(
        pool_reward_rate=pool_rate,
        pool_reward_se=pool_se,
        honest_reward_rate=honest_rate,
        honest_reward_se=honest_se,
        main_chain_fraction=pool_rate + honest_rate,
        total_discoveries=total,
        pool_blocks=pool,
        honest_blocks=honest,
        orphaned=orphaned,
        replicas=len(counts),
    )


class Terminal(str, enum.Enum):
    CONVERGED_STABLE = "ConvergedStable"
    COLLAPSED = "Collapsed"
    MAX_STEPS_EXCEEDED = "MaxStepsExceeded"


class Basin(str, enum.Enum):
    CONVERGES_TO_STABLE = "ConvergesToStable"
    COLLAPSES = "Collapses"


@dataclass(frozen=True)
class DynamicsConfig:
    params: MarketParams
    h0: float
    eta: float = 0.1
    max_steps: int = 1_000_000
    tol: Optional[float] = None  # defaults to 1e-6 * B/C

    def __post_init__(self):
        if not (math.isfinite(self.h0) and self.h0 >= 0):
            raise DomainError(f"h0 must be nonnegative, got {self.h0!r}")
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta!r}")
        if self.max_steps < 0:
            raise DomainError("max_steps must be nonnegative")
        if self.tol is not None and not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol!r}")

    @property
    def tolerance(self):
        return self.tol if self.tol is not None else 1e-6 * self.params.capacity


@dataclass
class Trajectory:
    steps: list = field(default_factory=list)  # (step, honest hash rate, profit)
    terminal: Optional[Terminal] = None
    target: Optional[float] = None

    @property
    def final(self):
        return self.steps[-1][1]


def simulate_supply_dynamics(cfg):
    """Iterate the honest entry/exit law until it settles, collapses or runs out of steps."""
    params = cfg.params
    cost = params.hash_cost
    tol = cfg.tolerance
    target = solve_equilibria(params).stable_root
    traj = Trajectory(target=target)

    h = cfg.h0
    for step in range(cfg.max_steps + 1):
        if h == 0:
            traj.steps.append((step, 0.0, -cost))
            traj.terminal = Terminal.COLLAPSED
            return traj
        profit = profit_under_attack(h, params)
        traj.steps.append((step, h, profit))
        if target is not None and abs(h - target) <= tol:
            traj.terminal = Terminal.CONVERGED_STABLE
            return traj
        if h < tol and profit <= -cost:
            traj.steps.append((step + 1, 0.0, -cost))
            traj.terminal = Terminal.COLLAPSED
            return traj
        h = h * math.exp(cfg.eta * profit / cost)
    traj.terminal = Terminal.MAX_STEPS_EXCEEDED
    return traj


def classify_basin(params, h0, eta=0.1, tol=None, max_steps=1_000_000):
    """Whether honest supply starting at ``h0`` settles at the stable root or leaves."""
    traj = simulate_supply_dynamics(DynamicsConfig(params, h0, eta, max_steps, tol))
    if traj.terminal is Terminal.CONVERGED_STABLE:
        return Basin.CONVERGES_TO_STABLE
    if traj.terminal is Terminal.COLLAPSED:
        return Basin.COLLAPSES
    raise PreconditionError(f"dynamics from h0={h0!r} did not settle in {max_steps} steps")
