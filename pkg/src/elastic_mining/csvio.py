"""CSV ingestion and emission.

Dialect: UTF-8, header row, comma separator, ISO dates (``YYYY-MM-DD``) and
plain decimal numbers. Numbers are written with 12 significant digits, so a
written file parses back to exactly the values it shows.
"""

import csv
import datetime
import io
import math

import numpy as np

from .econometrics import MarketData
from .errors import DataError

MARKET_COLUMNS = ("date", "price", "difficulty", "hashrate", "coinbase_reward")
PANEL_COLUMNS = ("currency",) + MARKET_COLUMNS


def fmt(value, digits=12):
    """Format a number for machine-readable output."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, np.datetime64):
        return str(value.astype("datetime64[D]"))
    if isinstance(value, (datetime.date,)):
        return value.isoformat()
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def write_table(stream, header, rows):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def table_to_string(header, rows):
    buf = io.StringIO()
    write_table(buf, header, rows)
    return buf.getvalue()


def parse_date(text, line):
    try:
        return np.datetime64(datetime.date.fromisoformat(text.strip()), "D")
    except ValueError:
        raise DataError(f"bad date {text!r} (expected YYYY-MM-DD)", line) from None


def parse_number(text, line, column):
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"bad number {text!r} in column {column!r}", line) from None
    if not math.isfinite(value):
        raise DataError(f"non-finite number in column {column!r}", line)
    return value


def read_table(stream, required=(), numeric=None, text_columns=("currency",)):
    """Read a CSV into a dict of column name -> list of parsed values.

    ``date`` columns are parsed as dates, ``text_columns`` kept as strings and
    everything else parsed as finite floats. Errors carry the 1-based line.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty file: header row required", 1) from None
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError(f"missing column(s): {', '.join(missing)}", 1)
    if len(set(header)) != len(header):
        raise DataError("duplicate column names", 1)

    columns = {name: [] for name in header}
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, got {len(row)}", line)
        for name, cell in zip(header, row):
            if name == "date":
                columns[name].append(parse_date(cell, line))
            elif name in text_columns or (numeric is not None and name not in numeric):
                columns[name].append(cell.strip())
            else:
                columns[name].append(parse_number(cell, line, name))
        columns.setdefault("_line", []).append(line)
    return columns


def read_csv(path, **kwargs):
    with open(path, newline="", encoding="utf-8-sig") as fh:
        return read_table(fh, **kwargs)


def _check_dates(dates, lines, label=""):
    for k in range(1, len(dates)):
        if dates[k] <= dates[k - 1]:
            raise DataError(f"dates must be strictly increasing{label}", lines[k])


def markets_from_columns(columns):
    """Split market or panel columns into one :class:`MarketData` per currency."""
    lines = columns.get("_line", [])
    if not lines:
        raise DataError("no data rows", 2)
    currencies = columns.get("currency") or ["-"] * len(lines)
    order = []
    rows = {}
    for idx, cur in enumerate(currencies):
        if cur not in rows:
            order.append(cur)
            rows[cur] = []
        rows[cur].append(idx)

    markets = []
    for cur in order:
        idx = rows[cur]
        dates = np.array([columns["date"][i] for i in idx], dtype="datetime64[D]")
        _check_dates(dates, [lines[i] for i in idx], f" for currency {cur!r}" if cur != "-" else "")
        for col in ("price", "difficulty", "hashrate", "coinbase_reward"):
            for i in idx:
                if col in ("difficulty", "hashrate", "price") and columns[col][i] <= 0:
                    raise DataError(f"{col} must be positive", lines[i])
                if col == "coinbase_reward" and columns[col][i] < 0:
                    raise DataError("coinbase_reward must be nonnegative", lines[i])
        markets.append(MarketData(
            currency=cur,
            dates=dates,
            price=np.array([columns["price"][i] for i in idx]),
            difficulty=np.array([columns["difficulty"][i] for i in idx]),
            hashrate=np.array([columns["hashrate"][i] for i in idx]),
            coinbase_reward=np.array([columns["coinbase_reward"][i] for i in idx]),
        ))
    return markets


def read_markets(path):
    return markets_from_columns(read_csv(path, required=MARKET_COLUMNS))


def write_markets(stream, markets, with_currency=True):
    header = list(PANEL_COLUMNS if with_currency else MARKET_COLUMNS)
    rows = []
    for m in markets:
        for k in range(len(m.dates)):
            row = [m.dates[k], m.price[k], m.difficulty[k], m.hashrate[k], m.coinbase_reward[k]]
            rows.append(([m.currency] if with_currency else []) + row)
    write_table(stream, header, rows)
