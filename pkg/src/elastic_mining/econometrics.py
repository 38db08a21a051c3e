"""Detrending filters and the fixed-effects elasticity regression.

The pipeline turns daily price, difficulty and coinbase reward into per-hash
revenue (MRC), takes cycle components of log MRC and log total hash rate
(THR) under a Hodrick-Prescott, Baxter-King or Christiano-Fitzgerald filter,
and regresses the THR cycle on the MRC cycle with year-month fixed effects.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy import stats

from .errors import DataError, PreconditionError

ONE_DAY = np.timedelta64(1, "D")

BITCOIN_SCALE = 2.0**32
ETHEREUM_SCALE = 1.0


@dataclass(frozen=True)
class Series:
    """Daily observations on strictly increasing dates."""

    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        if dates.ndim != 1 or dates.shape != values.shape:
            raise DataError("dates and values must be 1-d arrays of equal length")
        if len(values) < 2:
            raise PreconditionError("a series needs at least 2 observations")
        if not np.all(np.isfinite(values)):
            raise DataError("series values must be finite")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DataError("series dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    @classmethod
    def daily(cls, values, start="2017-01-01"):
        values = np.asarray(values, dtype=float)
        dates = np.datetime64(start, "D") + np.arange(len(values))
        return cls(dates, values)

    def __len__(self):
        return len(self.values)

    @property
    def is_regular(self):
        return bool(np.all(np.diff(self.dates) == ONE_DAY))

    def require_regular(self):
        if not self.is_regular:
            gap = int(np.argmax(np.diff(self.dates) != ONE_DAY))
            raise PreconditionError(
                f"missing dates after {self.dates[gap]}; filters need daily sampling"
            )

    def with_values(self, values, sl=slice(None)):
        return Series(self.dates[sl], values)


@dataclass(frozen=True)
class FilterSpec:
    """Filter choice and parameters. Periods are in days."""

    kind: str = "hp"
    lamb: float = 10_000.0
    p_low: float = 7.0
    p_high: float = 90.0
    lead_lag: int = 12

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in ("hp", "bk", "cf"):
            raise PreconditionError(f"unknown filter kind {self.kind!r}")
        if not self.lamb > 0:
            raise PreconditionError("lambda must be positive")
        if not 2 <= self.p_low < self.p_high:
            raise PreconditionError("need 2 <= p_low < p_high")
        if int(self.lead_lag) != self.lead_lag or self.lead_lag < 1:
            raise PreconditionError("lead_lag must be a positive integer")


@dataclass(frozen=True)
class Decomposition:
    trend: Series
    cycle: Series
    trimmed: int = 0


@dataclass(frozen=True)
class PanelInput:
    """One row per (currency, date) with cycle components of log THR and log MRC."""

    currency: np.ndarray
    date: np.ndarray
    dlog_thr: np.ndarray
    dlog_mrc: np.ndarray
    year_month: np.ndarray

    def __post_init__(self):
        currency = np.asarray(self.currency).astype(str)
        date = np.asarray(self.date, dtype="datetime64[D]")
        y = np.asarray(self.dlog_thr, dtype=float)
        x = np.asarray(self.dlog_mrc, dtype=float)
        ym = np.asarray(self.year_month).astype(str)
        n = len(y)
        if not all(len(a) == n for a in (currency, date, x, ym)):
            raise DataError("panel columns must have equal length")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise DataError("panel regressors must be finite")
        keys = set(zip(currency.tolist(), date.tolist()))
        if len(keys) != n:
            raise DataError("duplicate (currency, date) rows in panel")
        for name, value in (("currency", currency), ("date", date), ("dlog_thr", y),
                            ("dlog_mrc", x), ("year_month", ym)):
            object.__setattr__(self, name, value)

    @classmethod
    def from_series(cls, currency, thr_cycle, mrc_cycle):
        """Align two cycle series on their common dates."""
        common, iy, ix = np.intersect1d(thr_cycle.dates, mrc_cycle.dates, return_indices=True)
        return cls(
            currency=np.full(len(common), currency),
            date=common,
            dlog_thr=thr_cycle.values[iy],
            dlog_mrc=mrc_cycle.values[ix],
            year_month=year_month_of(common),
        )

    def __len__(self):
        return len(self.dlog_thr)


@dataclass(frozen=True)
class RegressionResult:
    coefficient: float
    std_error: float
    t_value: float
    n_obs: int
    n_groups: int
    residuals: np.ndarray

    @property
    def p_value(self):
        dof = self.n_obs - self.n_groups - 1
        return float(2 * stats.t.sf(abs(self.t_value), dof))


def year_month_of(dates):
    return np.datetime_as_string(np.asarray(dates, dtype="datetime64[M]"), unit="M")


def per_hash_revenue(price, difficulty, reward_per_block, scale=1.0):
    """Coinbase revenue per unit of hash work: ``price * reward / (difficulty * scale)``.

    ``scale`` converts difficulty to expected hashes per block (``2**32`` for
    Bitcoin-style difficulty, 1 where difficulty already counts hashes). It
    cancels in log cycles, so it never changes the estimated elasticity.
    """
    for other in (difficulty, reward_per_block):
        if len(other) != len(price) or np.any(other.dates != price.dates):
            raise DataError("price, difficulty and reward series must share dates")
    if np.any(difficulty.values <= 0):
        raise DataError("difficulty must be positive")
    if not scale > 0:
        raise DataError("scale must be positive")
    mrc = price.values * reward_per_block.values / (difficulty.values * scale)
    return price.with_values(mrc)


def hp_banded(n, lamb):
    """``D D' + I/lamb`` for the ``(n-2)``-row second-difference operator ``D``.

    Upper band storage as used by ``solveh_banded``. Its conditioning does not
    grow with ``lamb``, unlike that of ``I + lamb D'D``.
    """
    ab = np.zeros((3, n - 2))
    ab[0, 2:] = 1.0
    ab[1, 1:] = -4.0
    ab[2, :] = 6.0 + 1.0 / lamb
    return ab


def _second_difference_t(w, n):
    """``D' w``."""
    out = np.zeros(n)
    out[:-2] += w
    out[1:-1] -= 2 * w
    out[2:] += w
    return out


def hp_filter(y, lamb=10_000.0):
    """Hodrick-Prescott trend/cycle split.

    The trend solves ``(I + lamb D'D) trend = y``. By the Woodbury identity
    ``trend = y - D' (D D' + I/lamb)^-1 D y``, a banded solve whose accuracy
    holds up for very large ``lamb`` and which leaves exact lines untouched.
    The residual of the original equations is then checked.
    """
    values = y.values
    n = len(values)
    if n < 4:
        raise PreconditionError("HP filter needs at least 4 observations")
    if not lamb > 0:
        raise PreconditionError("lambda must be positive")
    y.require_regular()
    w = linalg.solveh_banded(hp_banded(n, lamb), np.diff(values, 2))
    cycle = _second_difference_t(w, n)
    trend = values - cycle

    residual = np.linalg.norm(_hp_apply(trend, lamb) - values)
    if residual > hp_tolerance(values, trend, lamb):
        raise ArithmeticError("HP normal equations not satisfied to 1e-8")
    return Decomposition(y.with_values(trend), y.with_values(cycle))


def hp_tolerance(values, trend, lamb):
    """Allowed residual norm: ``1e-8 * |y|``, unless rounding in evaluating
    ``lamb D'D trend`` alone exceeds that (only for lambda far above 1e6)."""
    floor = 128 * np.finfo(float).eps * lamb * np.linalg.norm(trend)
    return max(1e-8 * np.linalg.norm(values), floor, np.finfo(float).tiny)


def _hp_apply(tau, lamb):
    """``(I + lamb D'D) tau`` without forming the matrix."""
    d2 = tau[2:] - 2 * tau[1:-1] + tau[:-2]
    dtd = np.zeros_like(tau)
    dtd[:-2] += d2
    dtd[1:-1] -= 2 * d2
    dtd[2:] += d2
    return tau + lamb * dtd


def ideal_bandpass_weights(p_low, p_high, count):
    """Ideal band-pass weights ``B_0 .. B_{count-1}`` for periods in ``[p_low, p_high]``."""
    lo_freq = 2 * np.pi / p_high
    hi_freq = 2 * np.pi / p_low
    j = np.arange(1, count)
    weights = np.empty(count)
    weights[0] = (hi_freq - lo_freq) / np.pi
    weights[1:] = (np.sin(hi_freq * j) - np.sin(lo_freq * j)) / (np.pi * j)
    return weights


def bk_weights(p_low, p_high, lead_lag):
    """Symmetric Baxter-King weights for lags ``-K .. K``, shifted to sum to zero."""
    half = ideal_bandpass_weights(p_low, p_high, lead_lag + 1)
    full = np.concatenate([half[:0:-1], half])
    return full - full.mean()


def bk_gain(period, p_low, p_high, lead_lag):
    """Frequency response of the Baxter-King filter at ``period`` (real, symmetric)."""
    w = bk_weights(p_low, p_high, lead_lag)
    lags = np.arange(-lead_lag, lead_lag + 1)
    return float(np.sum(w * np.cos(2 * np.pi * lags / period)))


def bk_filter(y, spec=None):
    """Baxter-King band-pass; the first and last ``lead_lag`` days are dropped."""
    spec = spec or FilterSpec(kind="bk")
    k = int(spec.lead_lag)
    values = y.values
    n = len(values)
    if n <= 2 * k:
        raise PreconditionError(f"BK filter needs more than {2 * k} observations, got {n}")
    y.require_regular()
    w = bk_weights(spec.p_low, spec.p_high, k)
    cycle = np.convolve(values, w[::-1], mode="valid")
    interior = slice(k, n - k)
    return Decomposition(
        trend=y.with_values(values[interior] - cycle, interior),
        cycle=y.with_values(cycle, interior),
        trimmed=k,
    )


def cf_weight_matrix(n, p_low, p_high):
    """Rows of weights for the full-sample random-walk Christiano-Fitzgerald filter.

    Row ``t`` applies ideal weights to interior observations and the
    tail-sum weights ``-B_0/2 - sum(B_1..B_{k-1})`` to the two endpoints, so
    each row sums to zero.
    """
    b = ideal_bandpass_weights(p_low, p_high, n)
    csum = np.concatenate([[0.0], np.cumsum(b[1:])])  # csum[k] = B_1 + ... + B_k
    half = 0.5 * b[0]
    w = np.zeros((n, n))
    for t in range(n):
        w[t, t] = b[0]
        ahead = n - 1 - t
        if ahead >= 1:
            w[t, t + 1:n - 1] = b[1:ahead]
            w[t, n - 1] += -half - csum[ahead - 1]
        else:
            w[t, t] -= half
        if t >= 1:
            w[t, 1:t] = b[t - 1:0:-1]
            w[t, 0] += -half - csum[t - 1]
        else:
            w[t, t] -= half
    return w


def cf_filter(y, spec=None, drift=True):
    """Christiano-Fitzgerald asymmetric band-pass (random-walk variant), no trimming.

    With ``drift=True`` the straight line through the first and last
    observation is removed before filtering.
    """
    spec = spec or FilterSpec(kind="cf")
    values = y.values
    n = len(values)
    if n < 8:
        raise PreconditionError("CF filter needs at least 8 observations")
    y.require_regular()
    x = values
    if drift:
        x = values - np.arange(n) * (values[-1] - values[0]) / (n - 1)
    cycle = cf_weight_matrix(n, spec.p_low, spec.p_high) @ x
    return Decomposition(y.with_values(values - cycle), y.with_values(cycle))


def apply_filter(y, spec):
    if spec.kind == "hp":
        return hp_filter(y, spec.lamb)
    if spec.kind == "bk":
        return bk_filter(y, spec)
    return cf_filter(y, spec)


def log_cycle(y, spec):
    """Cycle component of ``log(y)`` under ``spec``."""
    if np.any(y.values <= 0):
        raise PreconditionError("log cycle needs strictly positive values")
    return apply_filter(y.with_values(np.log(y.values)), spec).cycle


def first_difference(y):
    """Day-over-day change, dated at the later day."""
    if len(y) < 2:
        raise PreconditionError("first difference needs at least 2 observations")
    return Series(y.dates[1:], np.diff(y.values))


def fe_ols(panel):
    """OLS slope of ``dlog_thr`` on ``dlog_mrc`` with year-month fixed effects.

    Both variables are demeaned within each year-month group. Standard errors
    are classical (homoskedastic) with ``n - groups - 1`` degrees of freedom.
    """
    y = panel.dlog_thr
    x = panel.dlog_mrc
    groups, codes, sizes = np.unique(panel.year_month, return_inverse=True, return_counts=True)
    if len(groups) < 2 and len(y) < 3:
        raise PreconditionError("too few observations for a fixed-effects regression")
    if len(groups) >= 2 and np.count_nonzero(sizes >= 2) < 2:
        raise PreconditionError("need at least 2 year-month groups with 2 or more rows")

    y_w = y - (np.bincount(codes, y) / sizes)[codes]
    x_w = x - (np.bincount(codes, x) / sizes)[codes]
    sxx = float(x_w @ x_w)
    if not sxx > 1e-14 * max(float(x @ x), np.finfo(float).tiny):
        raise PreconditionError("regressor has no within-group variation")

    beta = float(x_w @ y_w) / sxx
    resid = y_w - beta * x_w
    dof = len(y) - len(groups) - 1
    if dof < 1:
        raise PreconditionError("no residual degrees of freedom")
    sigma2 = float(resid @ resid) / dof
    se = math.sqrt(sigma2 / sxx)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = float(np.divide(beta, se)) if se > 0 else math.copysign(math.inf, beta)
    return RegressionResult(beta, se, t, len(y), len(groups), resid)


def synthetic_panel(seed, n=1300, elasticity=0.15, noise=0.05, x_scale=0.2, lamb=10_000.0):
    """Rows with ``y = elasticity * x + noise``, ``x`` the HP cycle of white noise."""
    rng = np.random.default_rng(seed)
    raw = Series.daily(rng.normal(0.0, x_scale, n))
    x = hp_filter(raw, lamb).cycle.values
    y = elasticity * x + rng.normal(0.0, noise, n)
    return PanelInput(
        currency=np.full(n, "SYN"),
        date=raw.dates,
        dlog_thr=y,
        dlog_mrc=x,
        year_month=year_month_of(raw.dates),
    )


@dataclass(frozen=True)
class MarketData:
    """Daily market observations for one currency."""

    currency: str
    dates: np.ndarray
    price: np.ndarray
    difficulty: np.ndarray
    hashrate: np.ndarray
    coinbase_reward: np.ndarray

    def series(self, column):
        return Series(self.dates, getattr(self, column))


def synthetic_market(seed, currency="SYN", n=1300, elasticity=0.15, noise=0.05,
                     start="2017-01-01", scale=1.0):
    """Daily market data whose log hash rate responds to log per-hash revenue.

    ``log THR = a + b t + elasticity * log MRC + e`` with a linear trend in
    ``log MRC`` plus stationary fluctuations, so every filter recovers the
    planted elasticity from the cycles.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    dates = np.datetime64(start, "D") + t
    fluct = hp_filter(Series(dates, rng.normal(0.0, 0.2, n))).cycle.values
    log_mrc = -20.0 - 0.001 * t + fluct
    log_thr = 10.0 + 0.002 * t + elasticity * log_mrc + rng.normal(0.0, noise, n)
    price = 1000.0 * np.exp(0.0005 * t + rng.normal(0.0, 0.01, n))
    reward = np.where(t < n // 2, 12.5, 6.25)
    difficulty = price * reward / (np.exp(log_mrc) * scale)
    return MarketData(currency, dates, price, difficulty, np.exp(log_thr), reward)


def elasticity_panel(market, spec, scale=1.0, difference=None):
    """Build the regression panel for one currency.

    ``difference`` may be ``"thr"`` or ``"mrc"`` to use the day-over-day change
    of that log variable instead of its filter cycle.
    """
    mrc = per_hash_revenue(market.series("price"), market.series("difficulty"),
                           market.series("coinbase_reward"), scale)
    thr = market.series("hashrate")
    if np.any(thr.values <= 0):
        raise PreconditionError("hash rate must be positive")

    def transform(s, side):
        if difference == side:
            return first_difference(s.with_values(np.log(s.values)))
        return log_cycle(s, spec)

    return PanelInput.from_series(market.currency, transform(thr, "thr"), transform(mrc, "mrc"))


def regress_market(market, spec, scale=1.0, difference=None):
    return fe_ols(elasticity_panel(market, spec, scale, difference))
