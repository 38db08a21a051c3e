"""Closed-form selfish-mining revenue under the Eyal-Sirer strategy.

Revenues are expressed per block *discovery*, hidden discoveries included, so
``r_pool + r_others`` is the fraction of all discovered blocks that end up in
the main chain. The remainder is honest work erased by the attack.

All functions are pure and operate on scalars.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

ALPHA_MAX_DOMAIN = 0.5


def _denominator(alpha):
    return 2 * alpha**3 - 4 * alpha**2 + 1


def _check_denominator():
    # 1 at alpha=0, 1/4 at alpha=1/2 and decreasing in between; verified, not assumed.
    grid = np.linspace(0.0, ALPHA_MAX_DOMAIN, 100_001)
    lowest = float(np.min(_denominator(grid)))
    if not lowest > 0:
        raise AssertionError(f"revenue denominator not positive on [0, 1/2]: min={lowest}")
    return lowest


DENOMINATOR_MIN = _check_denominator()


@dataclass(frozen=True)
class AttackConfig:
    """Attacker hash share ``alpha`` and race-win ratio ``gamma``."""

    alpha: float
    gamma: float

    def __post_init__(self):
        check_domain(self.alpha, self.gamma)


@dataclass(frozen=True)
class RevenueShares:
    r_pool: float
    r_others: float

    @property
    def effective(self):
        return self.r_pool + self.r_others


def check_domain(alpha, gamma):
    if not 0.0 <= alpha <= ALPHA_MAX_DOMAIN:
        raise DomainError(f"alpha must lie in [0, 1/2], got {alpha!r}")
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma!r}")


def _shares(alpha, gamma):
    a = alpha
    den = _denominator(a)
    pool = ((-2 * a**4 + 5 * a**3 - 4 * a**2 + a) * gamma + 4 * a**4 - 9 * a**3 + 4 * a**2) / den
    honest = (
        (2 * a**4 - 5 * a**3 + 4 * a**2 - a) * gamma - 4 * a**4 + 10 * a**3 - 6 * a**2 - a + 1
    ) / den
    return pool, honest


def revenue_shares(cfg):
    """Expected pool and honest reward per block discovery, as fractions of B.

    Parameters
    ----------
    cfg : AttackConfig or tuple of (alpha, gamma)

    Returns
    -------
    RevenueShares
    """
    alpha, gamma = _unpack(cfg)
    pool, honest = _shares(alpha, gamma)
    return RevenueShares(pool, honest)


def effective_power_fraction(cfg):
    """Share of total hash power whose blocks land in the main chain."""
    return revenue_shares(cfg).effective


def attack_advantage(cfg):
    """The attack-advantage function ``f(alpha)``.

    ``f(alpha) = alpha * r_others / ((1 - alpha) * (r_pool + r_others))``.
    Equilibria of the elastic-supply model are the roots of ``f(alpha) = M*C/B``.
    """
    alpha, gamma = _unpack(cfg)
    return _advantage(alpha, gamma)


def _advantage(alpha, gamma):
    pool, honest = _shares(alpha, gamma)
    return alpha * honest / ((1 - alpha) * (pool + honest))


def argmax_gamma(alpha):
    """Right-hand side of the stationarity condition ``f'(alpha) = 0`` solved for gamma."""
    num, den = _argmax_terms(alpha)
    return num / den


def argmax_residual(alpha, gamma):
    """``num(alpha) - gamma * den(alpha)``; positive where f is increasing in alpha."""
    num, den = _argmax_terms(alpha)
    return num - gamma * den


def _argmax_terms(alpha):
    a = alpha
    num = 4 * a**6 - 16 * a**5 + 26 * a**3 - 16 * a**2 + 1
    den = 2 * a**6 - 8 * a**5 - a**4 + 14 * a**3 - 10 * a**2 + 2 * a
    return num, den


def _unpack(cfg):
    if isinstance(cfg, AttackConfig):
        return cfg.alpha, cfg.gamma
    alpha, gamma = cfg
    alpha, gamma = float(alpha), float(gamma)
    check_domain(alpha, gamma)
    return alpha, gamma
