"""Free-entry equilibria of honest hash supply under a selfish-mining attack.

Honest miners enter while their per-hash profit is positive and leave while it
is negative. Writing ``alpha = M / (H + M)`` and ``kappa = M*C/B``, the honest
profit under attack reduces to ``(B/M) * (f(alpha) - kappa)``, so equilibria
are the solutions of ``f(alpha) = kappa`` with ``f`` the attack-advantage
function from :mod:`elastic_mining.mining_model`.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .errors import DomainError
from .mining_model import _advantage, _shares, argmax_residual, check_domain
from .optimize import bisect, golden_section_max

TANGENT_TOL = 1e-12
ROOT_RESIDUAL_TOL = 1e-10
_FD_STEP = 1e-6


class Verdict(str, enum.Enum):
    COLLAPSE = "Collapse"
    TWO_ROOTS = "TwoRoots"
    TANGENT_ROOT = "TangentRoot"


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class MarketParams:
    """Block reward ``B``, per-hash cost ``C``, attacker hash rate ``M`` and ``gamma``.

    ``C`` is the cost of one unit of hash rate over one block interval, so
    ``B / C`` is the total hash rate the chain supports with zero profit.
    """

    block_reward: float
    hash_cost: float
    attacker: float
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("block_reward", "hash_cost", "attacker"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in [0, 1], got {self.gamma!r}")
        if not self.attacker < self.capacity:
            raise DomainError(
                f"attacker hash rate {self.attacker!r} must be below B/C = {self.capacity!r}"
            )

    @property
    def capacity(self):
        """``B / C``: total hash rate sustained at zero profit."""
        return self.block_reward / self.hash_cost

    @property
    def kappa(self):
        return self.attacker * self.hash_cost / self.block_reward

    def alpha_of(self, honest):
        return self.attacker / (honest + self.attacker)

    def honest_of(self, alpha):
        return self.attacker * (1 - alpha) / alpha


@dataclass(frozen=True)
class EquilibriumOutcome:
    kappa: float
    verdict: Verdict
    alpha_max: float
    f_max: float
    h1: Optional[float] = None
    h2: Optional[float] = None
    alpha1: Optional[float] = None
    alpha2: Optional[float] = None
    stability1: Optional[Stability] = None
    stability2: Optional[Stability] = None

    @property
    def has_roots(self):
        return self.verdict is not Verdict.COLLAPSE

    @property
    def stable_root(self):
        """The stable honest hash rate, or None if there is none."""
        if self.verdict is Verdict.TWO_ROOTS:
            return self.h2
        return None


@dataclass(frozen=True)
class RushingOutcome:
    collapse: bool
    beta_minus: Optional[float] = None
    beta_plus: Optional[float] = None


def profit_no_attack(honest, params):
    """Honest per-hash profit without an attack: ``B / (H + M) - C``."""
    if honest < 0:
        raise DomainError(f"honest hash rate must be nonnegative, got {honest!r}")
    return params.block_reward / (honest + params.attacker) - params.hash_cost


def baseline_equilibrium(params):
    """Zero-profit honest hash rate without an attack, ``B/C - M``."""
    return params.capacity - params.attacker


def profit_under_attack(honest, params):
    """Honest per-hash profit while the pool mines selfishly.

    Once the pool holds half the hash power or more, honest blocks are all
    erased and the profit is ``-C``.
    """
    if not honest > 0:
        raise DomainError(f"honest hash rate must be positive, got {honest!r}")
    alpha = params.alpha_of(honest)
    if alpha >= 0.5:
        return -params.hash_cost
    pool, others = _shares(alpha, params.gamma)
    b = params.block_reward
    revenue = b * (others / (1 - alpha)) / ((pool + others) * (honest + params.attacker))
    return revenue - params.hash_cost


def profit_from_advantage(honest, params):
    """Same quantity as :func:`profit_under_attack`, via ``(B/M)(f(alpha) - kappa)``."""
    if not honest > 0:
        raise DomainError(f"honest hash rate must be positive, got {honest!r}")
    alpha = params.alpha_of(honest)
    if alpha >= 0.5:
        return -params.hash_cost
    advantage = _advantage(alpha, params.gamma)
    return params.block_reward / params.attacker * (advantage - params.kappa)


def alpha_max(gamma):
    """Maximizer of the attack-advantage function on ``(0, 1/2)``.

    Found by bisection on the stationarity condition, which changes sign
    exactly once on the interval: positive at 0, negative at 1/2.
    """
    check_domain(0.0, gamma)
    return bisect(lambda a: argmax_residual(a, gamma), 0.0, 0.5)


def alpha_max_golden(gamma, tol=1e-12):
    """Maximizer of the attack-advantage function by direct golden-section search."""
    check_domain(0.0, gamma)
    return golden_section_max(lambda a: _advantage(a, gamma), 0.0, 0.5, tol=tol)


def collapse_threshold(gamma):
    """``f(alpha_max)``: the largest attacker share of ``B/C`` with an equilibrium."""
    return _advantage(alpha_max(gamma), gamma)


def m_max(params):
    """Largest attacker hash rate for which honest miners can stay."""
    return collapse_threshold(params.gamma) * params.capacity


def advantage_slope(alpha, gamma, step=_FD_STEP):
    """Central finite-difference slope of ``f`` at ``alpha``."""
    lo = max(alpha - step, 0.0)
    hi = min(alpha + step, 0.5)
    return (_advantage(hi, gamma) - _advantage(lo, gamma)) / (hi - lo)


def solve_equilibria(params):
    """Classify the attacked market and locate its zero-profit honest hash rates.

    Returns
    -------
    EquilibriumOutcome
        ``Collapse`` if no honest hash rate above ``M`` breaks even,
        ``TangentRoot`` when ``M`` sits at ``M_max``, otherwise ``TwoRoots``
        with ``h1 < h2``. The larger root is the stable one.
    """
    gamma = params.gamma
    kappa = params.kappa
    a_max = alpha_max(gamma)
    f_max = _advantage(a_max, gamma)

    if kappa > f_max + TANGENT_TOL:
        return EquilibriumOutcome(kappa, Verdict.COLLAPSE, a_max, f_max)
    if abs(kappa - f_max) <= TANGENT_TOL:
        h = params.honest_of(a_max)
        return EquilibriumOutcome(
            kappa, Verdict.TANGENT_ROOT, a_max, f_max,
            h1=h, h2=h, alpha1=a_max, alpha2=a_max,
            stability1=Stability.UNSTABLE, stability2=Stability.UNSTABLE,
        )

    # f(0) = f(1/2) = 0 < kappa, so both half-intervals bracket a root.
    gap = lambda a: _advantage(a, gamma) - kappa  # noqa: E731
    alpha2 = bisect(gap, 0.0, a_max)
    alpha1 = bisect(gap, a_max, 0.5)
    for a in (alpha1, alpha2):
        residual = abs(gap(a))
        if residual > ROOT_RESIDUAL_TOL:
            raise ArithmeticError(f"equilibrium residual {residual:.3g} at alpha={a!r}")

    return EquilibriumOutcome(
        kappa, Verdict.TWO_ROOTS, a_max, f_max,
        h1=params.honest_of(alpha1),
        h2=params.honest_of(alpha2),
        alpha1=alpha1,
        alpha2=alpha2,
        stability1=_stability(alpha1, gamma),
        stability2=_stability(alpha2, gamma),
    )


def _stability(alpha, gamma):
    # H grows as alpha shrinks: f' > 0 means profit falls when H rises, so H is pulled back.
    return Stability.STABLE if advantage_slope(alpha, gamma) > 0 else Stability.UNSTABLE


def rushing_profit(alpha, beta):
    """Total honest profit when a rushing attacker erases one honest block per own block.

    Hash power, block reward and pre-attack cost are normalized to 1; ``beta``
    is the honest hash power that has left.
    """
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha!r}")
    if beta < 0:
        raise DomainError(f"beta must be nonnegative, got {beta!r}")
    if not 1 - 2 * alpha - beta > 0:
        raise DomainError("attacker erases all remaining honest work (1 - 2*alpha - beta <= 0)")
    return (beta - (alpha + beta) ** 2) / (1 - alpha - beta)


def rushing_equilibria(alpha):
    """Departures ``beta`` that restore zero honest profit against a rushing attacker."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    disc = 1 - 4 * alpha
    if disc < 0:
        return RushingOutcome(collapse=True)
    beta_plus = 0.5 * ((1 - 2 * alpha) + math.sqrt(disc))
    # product of the roots is alpha^2; avoids cancellation for small alpha
    beta_minus = alpha * alpha / beta_plus
    return RushingOutcome(collapse=False, beta_minus=beta_minus, beta_plus=beta_plus)
