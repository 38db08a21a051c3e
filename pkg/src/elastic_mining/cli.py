"""Command-line front end.

Exit codes: 0 success, 2 usage or malformed input, 3 model-domain violation,
4 numeric precondition failure.
"""

import argparse
import math
import sys

import numpy as np

from . import csvio
from .econometrics import FilterSpec, Series, apply_filter, regress_market, synthetic_market
from .equilibrium import (
    MarketParams,
    alpha_max,
    baseline_equilibrium,
    m_max,
    profit_under_attack,
    solve_equilibria,
)
from .errors import DataError, DomainError, PreconditionError
from .mining_model import _advantage, revenue_shares
from .simulation import DynamicsConfig, SimConfig, simulate_selfish_mining, simulate_supply_dynamics

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_PRECONDITION = 4

T_PRINT_CAP = 1e6


class UsageError(Exception):
    pass


def _positive(text):
    value = _finite(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return value


def _nonneg(text):
    value = _finite(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text}")
    return value


def _fraction(text):
    value = _finite(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1]: {text}")
    return value


def _finite(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text}")
    return value


def _count(minimum):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}: {text}")
        return value
    return parse


def _seed(text):
    value = _count(0)(text)
    if value >= 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _add_market_flags(p):
    p.add_argument("--block-reward", type=_positive, required=True, metavar="B",
                   help="expected reward per block")
    p.add_argument("--hash-cost", type=_positive, required=True, metavar="C",
                   help="cost per unit hash rate per block interval")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--attacker", type=_positive, metavar="M", help="attacker hash rate")
    group.add_argument("--attacker-share", type=_positive, metavar="S",
                       help="attacker hash rate as a fraction of B/C")
    p.add_argument("--gamma", type=_fraction, default=1.0)


def _market_params(args):
    attacker = args.attacker
    if attacker is None:
        attacker = args.attacker_share * args.block_reward / args.hash_cost
    return MarketParams(args.block_reward, args.hash_cost, attacker, args.gamma)


def _add_filter_flags(p):
    p.add_argument("--filter", choices=("hp", "bk", "cf"), default="hp")
    p.add_argument("--lambda", dest="lamb", type=_positive, default=10_000.0,
                   help="HP smoothing weight (default 10000)")
    p.add_argument("--low", type=_positive, default=7.0, help="shortest period kept, days")
    p.add_argument("--high", type=_positive, default=90.0, help="longest period kept, days")
    p.add_argument("--lead-lag", type=_count(1), default=12, help="BK half-window, days")


def _filter_spec(args):
    return FilterSpec(args.filter, args.lamb, args.low, args.high, args.lead_lag)


def _kv(out, key, value):
    out.write(f"{key}={csvio.fmt(value)}\n")


def _open_out(path, out):
    if path in (None, "-"):
        return _NoClose(out)
    return open(path, "w", newline="", encoding="utf-8")


class _NoClose:
    def __init__(self, stream):
        self.stream = stream

    def __enter__(self):
        return self.stream

    def __exit__(self, *exc):
        self.stream.flush()
        return False


def cmd_equilibrium(args, out):
    params = _market_params(args)
    outcome = solve_equilibria(params)
    _kv(out, "kappa", outcome.kappa)
    _kv(out, "verdict", outcome.verdict.value)
    _kv(out, "alpha_max", outcome.alpha_max)
    _kv(out, "f_max", outcome.f_max)
    _kv(out, "m_max", m_max(params))
    _kv(out, "baseline_h", baseline_equilibrium(params))
    if outcome.has_roots:
        _kv(out, "h1", outcome.h1)
        _kv(out, "alpha1", outcome.alpha1)
        _kv(out, "h1_stability", outcome.stability1.value)
        _kv(out, "h2", outcome.h2)
        _kv(out, "alpha2", outcome.alpha2)
        _kv(out, "h2_stability", outcome.stability2.value)
    return EXIT_OK


def mmax_rows(steps):
    rows = []
    for gamma in np.linspace(0.0, 1.0, steps):
        gamma = float(gamma)
        a = alpha_max(gamma)
        rows.append((gamma, a, _advantage(a, gamma)))
    return rows


def cmd_mmax_table(args, out):
    rows = mmax_rows(args.steps)
    if args.format == "csv":
        csvio.write_table(out, ["gamma", "alpha_max", "f_alpha_max"], rows)
        return EXIT_OK
    out.write(f"{'gamma':>8}  {'alpha_max':>10}  {'f(alpha_max)':>12}\n")
    for gamma, a, f in rows:
        out.write(f"{gamma:>8.4g}  {a:>10.4f}  {f:>12.4f}\n")
    return EXIT_OK


def curve_rows(params, points, h_min=None, h_max=None):
    """Honest per-hash revenue and cost over a grid of honest hash rates."""
    lo = params.attacker if h_min is None else h_min
    hi = 3 * params.capacity if h_max is None else h_max
    rows = []
    for h in np.linspace(lo, hi, points):
        h = float(h)
        revenue = profit_under_attack(h, params) + params.hash_cost
        rows.append((h, revenue, params.hash_cost))
    return rows


def cmd_curve(args, out):
    params = _market_params(args)
    if args.h_min is not None and not args.h_min > 0:
        raise UsageError("--h-min must be positive")
    rows = curve_rows(params, args.points, args.h_min, args.h_max)
    if rows[0][0] >= rows[-1][0]:
        raise UsageError("--h-max must exceed --h-min")
    with _open_out(args.output, out) as fh:
        csvio.write_table(fh, ["h", "revenue", "cost"], rows)
    return EXIT_OK


def cmd_simulate_protocol(args, out):
    try:
        cfg = SimConfig(args.alpha, args.gamma, args.blocks, args.replicas, args.seed)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    result = simulate_selfish_mining(cfg, workers=args.workers)
    shares = revenue_shares((args.alpha, args.gamma))
    for key in ("alpha", "gamma"):
        _kv(out, key, getattr(cfg, key))
    _kv(out, "blocks", cfg.num_blocks)
    _kv(out, "replicas", cfg.replicas)
    _kv(out, "seed", cfg.seed)
    for key in ("pool_reward_rate", "pool_reward_se", "honest_reward_rate", "honest_reward_se",
                "main_chain_fraction", "total_discoveries", "pool_blocks", "honest_blocks",
                "orphaned"):
        _kv(out, key, getattr(result, key))
    _kv(out, "closed_form_pool", shares.r_pool)
    _kv(out, "closed_form_honest", shares.r_others)
    return EXIT_OK


def cmd_simulate_dynamics(args, out):
    params = _market_params(args)
    try:
        cfg = DynamicsConfig(params, args.h0, args.eta, args.max_steps, args.tol)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    traj = simulate_supply_dynamics(cfg)
    outcome = solve_equilibria(params)
    _kv(out, "terminal", traj.terminal.value)
    _kv(out, "steps", traj.steps[-1][0])
    _kv(out, "h0", args.h0)
    _kv(out, "h_final", traj.final)
    _kv(out, "verdict", outcome.verdict.value)
    if outcome.has_roots:
        _kv(out, "h1", outcome.h1)
        _kv(out, "h2", outcome.h2)
    if args.trajectory:
        with _open_out(args.trajectory, out) as fh:
            csvio.write_table(fh, ["step", "h", "profit"], traj.steps)
    return EXIT_OK


def _select_currency(columns, currency):
    if "currency" not in columns:
        return columns
    names = list(dict.fromkeys(columns["currency"]))
    if currency is None:
        if len(names) != 1:
            raise UsageError(f"input holds several currencies {names}; pass --currency")
        currency = names[0]
    keep = [i for i, c in enumerate(columns["currency"]) if c == currency]
    if not keep:
        raise UsageError(f"currency {currency!r} not in input")
    return {k: [v[i] for i in keep] for k, v in columns.items()}


def detrend_rows(columns, column, spec, take_log):
    lines = columns["_line"]
    dates = np.array(columns["date"], dtype="datetime64[D]")
    csvio._check_dates(dates, lines)
    raw = np.array(columns[column], dtype=float)
    if take_log:
        bad = np.flatnonzero(raw <= 0)
        if len(bad):
            raise DataError(f"{column} must be positive to take logs", lines[bad[0]])
        raw = np.log(raw)
    if len(raw) < 2:
        raise PreconditionError("need at least 2 observations")
    dec = apply_filter(Series(dates, raw), spec)
    lo = dec.trimmed
    hi = len(raw) - dec.trimmed
    return [
        (dates[k], raw[k], dec.trend.values[k - lo], dec.cycle.values[k - lo])
        for k in range(lo, hi)
    ]


def cmd_detrend(args, out):
    spec = _filter_spec(args)
    columns = csvio.read_csv(args.input, required=("date", args.column), numeric={args.column})
    if not columns.get("_line"):
        raise DataError("no data rows", 2)
    columns = _select_currency(columns, args.currency)
    rows = detrend_rows(columns, args.column, spec, args.log)
    with _open_out(args.output, out) as fh:
        csvio.write_table(fh, ["date", "raw", "trend", "cycle"], rows)
    return EXIT_OK


def _parse_assignments(items, flag, convert):
    result = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"{flag} expects CURRENCY=VALUE, got {item!r}")
        result[key] = convert(value)
    return result


def _scale_value(text):
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"bad scale {text!r}") from None
    if not (math.isfinite(value) and value > 0):
        raise UsageError(f"scale must be positive, got {text!r}")
    return value


def _difference_side(text):
    if text not in ("thr", "mrc"):
        raise UsageError(f"difference side must be thr or mrc, got {text!r}")
    return text


def stars(p):
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def _capped(t):
    return max(-T_PRINT_CAP, min(T_PRINT_CAP, t))


def cmd_regress(args, out):
    spec = _filter_spec(args)
    scales = _parse_assignments(args.scale, "--scale", _scale_value)
    differences = _parse_assignments(args.difference, "--difference", _difference_side)
    markets = csvio.read_markets(args.input)
    names = [m.currency for m in markets]
    for key in list(scales) + list(differences):
        if key not in names:
            raise UsageError(f"currency {key!r} not in input")

    results = [
        (m.currency, regress_market(m, spec, scales.get(m.currency, 1.0),
                                    differences.get(m.currency)))
        for m in markets
    ]
    if args.format == "kv":
        for cur, res in results:
            tag = cur.lower()
            _kv(out, f"coefficient_{tag}", res.coefficient)
            _kv(out, f"std_error_{tag}", res.std_error)
            _kv(out, f"t_value_{tag}", _capped(res.t_value))
            _kv(out, f"p_value_{tag}", res.p_value)
            _kv(out, f"n_obs_{tag}", res.n_obs)
        return EXIT_OK

    width = 14
    out.write(f"{'':<14}" + "".join(f"{cur:>{width}}" for cur, _ in results) + "\n")
    out.write(f"{'':<14}" + "".join(f"{args.filter.upper():>{width}}" for _ in results) + "\n")
    out.write(f"{'dlog MRC':<14}" + "".join(
        f"{format(res.coefficient, '.4g') + stars(res.p_value):>{width}}" for _, res in results
    ) + "\n")
    out.write(f"{'':<14}" + "".join(
        f"{'(' + format(_capped(res.t_value), '.4g') + ')':>{width}}" for _, res in results
    ) + "\n")
    out.write(f"{'No. of obs.':<14}" + "".join(f"{res.n_obs:>{width}}" for _, res in results) + "\n")
    out.write("***p<0.01, **p<0.05, *p<0.1, t-values in parentheses.\n")
    return EXIT_OK


def cmd_synth(args, out):
    markets = [
        synthetic_market(args.seed + k, currency=cur, n=args.rows, elasticity=args.elasticity,
                         noise=args.noise)
        for k, cur in enumerate(args.currencies.split(","))
    ]
    with _open_out(args.output, out) as fh:
        csvio.write_markets(fh, markets)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="elastic-mining",
        description="Selfish mining under elastic hash supply: equilibria, simulation, "
                    "and hash-rate elasticity regressions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", help="solve for honest-supply equilibria")
    _add_market_flags(p)
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("mmax-table", help="collapse threshold f(alpha_max) over gamma")
    p.add_argument("--steps", type=_count(2), default=11)
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.set_defaults(func=cmd_mmax_table)

    p = sub.add_parser("curve", help="honest per-hash revenue and cost over H (CSV)")
    _add_market_flags(p)
    p.add_argument("--points", type=_count(10), default=400)
    p.add_argument("--h-min", type=_finite, default=None, help="default: M")
    p.add_argument("--h-max", type=_positive, default=None, help="default: 3 B/C")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("simulate", help="Monte Carlo protocol or supply dynamics")
    sim = p.add_subparsers(dest="mode", required=True)
    q = sim.add_parser("protocol", help="selfish-mining block race Monte Carlo")
    q.add_argument("--alpha", type=_finite, required=True)
    q.add_argument("--gamma", type=_finite, required=True)
    q.add_argument("--blocks", type=_count(1), default=1_000_000)
    q.add_argument("--replicas", type=_count(1), default=64)
    q.add_argument("--seed", type=_seed, required=True)
    q.add_argument("--workers", type=_count(1), default=None)
    q.set_defaults(func=cmd_simulate_protocol)
    q = sim.add_parser("dynamics", help="honest entry/exit trajectory")
    _add_market_flags(q)
    q.add_argument("--h0", type=_nonneg, required=True, help="initial honest hash rate")
    q.add_argument("--eta", type=_positive, default=0.1)
    q.add_argument("--max-steps", type=_count(0), default=1_000_000)
    q.add_argument("--tol", type=_positive, default=None, help="default: 1e-6 B/C")
    q.add_argument("--trajectory", default=None, help="write step,h,profit CSV here")
    q.add_argument("--seed", type=_seed, default=None, help="accepted for uniformity; unused")
    q.set_defaults(func=cmd_simulate_dynamics)

    p = sub.add_parser("detrend", help="trend/cycle decomposition of one CSV column")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--column", default="hashrate")
    p.add_argument("--log", action=argparse.BooleanOptionalAction, default=True,
                   help="take natural logs first (default: on)")
    p.add_argument("--currency", default=None)
    p.add_argument("--output", "-o", default=None)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_detrend)

    p = sub.add_parser("regress", help="hash-rate elasticity with year-month fixed effects")
    p.add_argument("--input", "-i", required=True)
    _add_filter_flags(p)
    p.add_argument("--scale", action="append", metavar="CUR=S",
                   help="difficulty-to-hashes factor per currency (default 1)")
    p.add_argument("--difference", action="append", metavar="CUR=SIDE",
                   help="use the daily difference of log thr or mrc for this currency")
    p.add_argument("--format", choices=("table", "kv"), default="table")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("synth", help="write a synthetic market panel CSV")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--currencies", default="SYN")
    p.add_argument("--rows", type=_count(30), default=1300)
    p.add_argument("--elasticity", type=_finite, default=0.15)
    p.add_argument("--noise", type=_nonneg, default=0.05)
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except UsageError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except DataError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except DomainError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except (PreconditionError, np.linalg.LinAlgError, ArithmeticError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_PRECONDITION
    except OSError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
