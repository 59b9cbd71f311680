"""Minute-grid construction from minute-bar or tick CSV data.

A trading session is a fixed grid of T minutes per (symbol, day):
1440 for round-the-clock crypto sessions, 390 for a US equity session,
or anything smaller for tests.  Sessions start at a configurable UTC
time-of-day; timestamps outside the session are ignored.  Missing minutes
are filled with return 0 / volume 0 (closes carry forward), and a day
missing more than 20% of its minutes is rejected with a warning record
instead of inventing prices.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_MISSING_FRACTION = 0.20


class AssetClass(str, Enum):
    CRYPTO = "crypto"
    EQUITY = "equity"


class CsvParseError(ValueError):
    """Malformed input row; carries the 1-based line number."""

    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {detail}")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class CalendarSpec:
    """Session layout shared by every asset in a portfolio."""

    minutes_per_day: int = 1440
    day_boundary: dt.time = dt.time(0, 0)
    asset_class: AssetClass = AssetClass.CRYPTO

    def __post_init__(self):
        if self.minutes_per_day < 2:
            raise ValueError("minutes_per_day must be >= 2")

    @classmethod
    def crypto(cls, minutes_per_day: int = 1440) -> "CalendarSpec":
        return cls(minutes_per_day, dt.time(0, 0), AssetClass.CRYPTO)

    @classmethod
    def equity(cls, minutes_per_day: int = 390) -> "CalendarSpec":
        # 13:30 UTC = 09:30 New York standard market open
        return cls(minutes_per_day, dt.time(13, 30), AssetClass.EQUITY)

    def periods_per_year(self) -> int:
        return 365 if self.asset_class is AssetClass.CRYPTO else 252

    def session_start(self, day: dt.date) -> dt.datetime:
        return dt.datetime.combine(day, self.day_boundary, tzinfo=dt.timezone.utc)

    def locate(self, ts: dt.datetime) -> tuple[dt.date, int] | None:
        """Map a UTC timestamp to (session day, minute index), or None if
        the timestamp falls outside the session window."""
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=dt.timezone.utc)
        boundary_secs = (
            self.day_boundary.hour * 3600
            + self.day_boundary.minute * 60
            + self.day_boundary.second
        )
        shifted = ts - dt.timedelta(seconds=boundary_secs)
        day = shifted.date()
        offset = ts - self.session_start(day)
        minute = int(offset.total_seconds() // 60)
        if 0 <= minute < self.minutes_per_day:
            return day, minute
        return None


@dataclass(frozen=True)
class MinuteGrid:
    """One asset-day of aligned minute returns and dollar volumes."""

    symbol: str
    date: dt.date
    returns: np.ndarray
    dollar_volume: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=np.float64)
        v = np.asarray(self.dollar_volume, dtype=np.float64)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "dollar_volume", v)
        if r.shape != v.shape or r.ndim != 1:
            raise ValueError("returns and dollar_volume must be 1-d vectors of equal length")
        if not np.all(np.isfinite(r)):
            raise ValueError(f"{self.symbol} {self.date}: non-finite returns")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError(f"{self.symbol} {self.date}: dollar volumes must be finite and >= 0")


@dataclass(frozen=True)
class AssetDay:
    """Day-level regular and liquidity-adjusted return/volatility of one asset.

    degenerate is set when the day had no usable return/volume variation, in
    which case the adjusted quantities fall back to the regular ones so the
    day stays in the return series while being excluded from liquidity-ratio
    descriptive statistics.
    """

    symbol: str
    date: dt.date
    daily_return: float
    daily_liq_return: float
    daily_vol: float
    daily_liq_vol: float
    degenerate: bool = False


@dataclass(frozen=True)
class RejectedDay:
    """Warning record for a day dropped by the missing-minute rule."""

    symbol: str
    date: dt.date
    missing_minutes: int
    total_minutes: int
    reason: str


@dataclass
class IngestResult:
    grids: list[MinuteGrid] = field(default_factory=list)
    rejected: list[RejectedDay] = field(default_factory=list)


def daily_compound_return(returns: Sequence[float] | np.ndarray) -> float:
    """Compound minute returns into the day return: prod(1 + r) - 1."""
    r = np.asarray(returns, dtype=np.float64)
    if np.any(r <= -1.0):
        raise DomainError("minute return <= -1 cannot be compounded")
    return float(np.prod(1.0 + r) - 1.0)


def _parse_timestamp(raw: str, line_no: int) -> dt.datetime:
    raw = raw.strip()
    if not raw:
        raise CsvParseError(line_no, "empty timestamp")
    if raw.isdigit() or (raw[0] in "+-" and raw[1:].isdigit()):
        # epoch milliseconds
        return dt.datetime.fromtimestamp(int(raw) / 1000.0, tz=dt.timezone.utc)
    try:
        iso = raw[:-1] + "+00:00" if raw.endswith("Z") else raw
        ts = dt.datetime.fromisoformat(iso)
    except ValueError as exc:
        raise CsvParseError(line_no, f"bad timestamp {raw!r}: {exc}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc)


def _parse_float(raw: str, name: str, line_no: int) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise CsvParseError(line_no, f"bad {name} {raw!r}") from None
    if not math.isfinite(val):
        raise CsvParseError(line_no, f"non-finite {name}")
    return val


def ingest_minute_csv(path, spec: CalendarSpec) -> IngestResult:
    """Read ``timestamp,symbol,close,dollar_volume`` rows into MinuteGrids.

    Timestamps are ISO-8601 UTC or epoch milliseconds (auto-detected per
    row).  One grid is emitted per (symbol, session day) ordered by symbol
    then date.  The first minute of each session links to the prior
    session's last close when available, else carries return 0.
    """
    per_symbol: dict[str, dict[dt.date, dict[int, tuple[float, float]]]] = {}
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvParseError(1, "empty file")
        expected = ["timestamp", "symbol", "close", "dollar_volume"]
        if [h.strip().lower() for h in header] != expected:
            raise CsvParseError(1, f"expected header {','.join(expected)}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise CsvParseError(line_no, f"expected 4 fields, got {len(row)}")
            ts = _parse_timestamp(row[0], line_no)
            symbol = row[1].strip()
            if not symbol:
                raise CsvParseError(line_no, "empty symbol")
            close = _parse_float(row[2], "close", line_no)
            volume = _parse_float(row[3], "dollar_volume", line_no)
            if close <= 0:
                raise CsvParseError(line_no, f"close must be > 0, got {close}")
            if volume < 0:
                raise CsvParseError(line_no, f"dollar_volume must be >= 0, got {volume}")
            loc = spec.locate(ts)
            if loc is None:
                continue
            day, minute = loc
            per_symbol.setdefault(symbol, {}).setdefault(day, {})[minute] = (close, volume)

    result = IngestResult()
    t = spec.minutes_per_day
    max_missing = int(MAX_MISSING_FRACTION * t)
    for symbol in sorted(per_symbol):
        prior_close: float | None = None
        for day in sorted(per_symbol[symbol]):
            minutes = per_symbol[symbol][day]
            missing = t - len(minutes)
            if missing > max_missing:
                result.rejected.append(
                    RejectedDay(symbol, day, missing, t, f"{missing}/{t} minutes missing")
                )
                # a rejected day still anchors the next session's open
                last_minute = max(minutes)
                prior_close = minutes[last_minute][0]
                continue
            returns = np.zeros(t)
            volumes = np.zeros(t)
            ref = prior_close
            for minute in range(t):
                if minute in minutes:
                    close, volume = minutes[minute]
                    returns[minute] = 0.0 if ref is None else close / ref - 1.0
                    volumes[minute] = volume
                    ref = close
            result.grids.append(MinuteGrid(symbol, day, returns, volumes))
            prior_close = ref
    return result


def aggregate_ticks(
    ticks: Iterable[tuple[dt.datetime, float, float]],
    spec: CalendarSpec,
    symbol: str = "",
    prior_close: float | None = None,
) -> MinuteGrid:
    """Aggregate time-sorted (timestamp, price, size) ticks of one session.

    Produces per-minute last price and summed dollar amount (price * size);
    minutes with no ticks carry return 0 and volume 0.
    """
    t = spec.minutes_per_day
    last_price = np.full(t, np.nan)
    volume = np.zeros(t)
    prev_ts: dt.datetime | None = None
    day: dt.date | None = None
    for ts, price, size in ticks:
        if prev_ts is not None and ts < prev_ts:
            raise ValueError(f"ticks not time-sorted at {ts}")
        prev_ts = ts
        loc = spec.locate(ts)
        if loc is None:
            continue
        tick_day, minute = loc
        if day is None:
            day = tick_day
        elif tick_day != day:
            raise ValueError("ticks span more than one session")
        last_price[minute] = price
        volume[minute] += price * size
    if day is None:
        raise ValueError("no ticks inside the session window")
    returns = np.zeros(t)
    ref = prior_close
    for minute in range(t):
        if not np.isnan(last_price[minute]):
            if ref is not None:
                returns[minute] = last_price[minute] / ref - 1.0
            ref = last_price[minute]
    return MinuteGrid(symbol, day, returns, volume)


def ingest_tick_csv(path, spec: CalendarSpec) -> IngestResult:
    """Read ``timestamp,symbol,price,size`` tick rows into MinuteGrids.

    Rows are grouped per (symbol, session day) and aggregated to per-minute
    last price and dollar volume.  Quiet minutes carry return 0 / volume 0;
    unlike minute bars, an empty minute is normal in tick data, so no
    day-level rejection applies.  The first minute of a session links to the
    prior session's last traded price when available.
    """
    groups: dict[str, dict[dt.date, list[tuple[dt.datetime, float, float]]]] = {}
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvParseError(1, "empty file")
        expected = ["timestamp", "symbol", "price", "size"]
        if [h.strip().lower() for h in header] != expected:
            raise CsvParseError(1, f"expected header {','.join(expected)}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise CsvParseError(line_no, f"expected 4 fields, got {len(row)}")
            ts = _parse_timestamp(row[0], line_no)
            symbol = row[1].strip()
            if not symbol:
                raise CsvParseError(line_no, "empty symbol")
            price = _parse_float(row[2], "price", line_no)
            size = _parse_float(row[3], "size", line_no)
            if price <= 0:
                raise CsvParseError(line_no, f"price must be > 0, got {price}")
            if size < 0:
                raise CsvParseError(line_no, f"size must be >= 0, got {size}")
            loc = spec.locate(ts)
            if loc is None:
                continue
            day, _ = loc
            groups.setdefault(symbol, {}).setdefault(day, []).append((ts, price, size))

    result = IngestResult()
    for symbol in sorted(groups):
        prior_close: float | None = None
        for day in sorted(groups[symbol]):
            ticks = groups[symbol][day]
            grid = aggregate_ticks(ticks, spec, symbol=symbol, prior_close=prior_close)
            prior_close = ticks[-1][1]
            result.grids.append(grid)
    return result


# ---------------------------------------------------------------------------
# grid (de)serialization; floats are written with repr for exact round-trip
# ---------------------------------------------------------------------------

GRID_HEADER = ["symbol", "date", "minute", "return", "dollar_volume"]


def write_grids_csv(path, grids: Sequence[MinuteGrid]) -> None:
    ordered = sorted(grids, key=lambda g: (g.symbol, g.date))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GRID_HEADER)
        for grid in ordered:
            for minute in range(grid.returns.shape[0]):
                writer.writerow(
                    [
                        grid.symbol,
                        grid.date.isoformat(),
                        minute,
                        repr(float(grid.returns[minute])),
                        repr(float(grid.dollar_volume[minute])),
                    ]
                )


def read_grids_csv(path) -> list[MinuteGrid]:
    rows: dict[tuple[str, dt.date], dict[int, tuple[float, float]]] = {}
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GRID_HEADER:
            raise CsvParseError(1, f"expected header {','.join(GRID_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise CsvParseError(line_no, f"expected 5 fields, got {len(row)}")
            key = (row[0], dt.date.fromisoformat(row[1]))
            rows.setdefault(key, {})[int(row[2])] = (float(row[3]), float(row[4]))
    grids = []
    for (symbol, day), minutes in sorted(rows.items()):
        t = max(minutes) + 1
        returns = np.array([minutes[m][0] for m in range(t)])
        volume = np.array([minutes[m][1] for m in range(t)])
        grids.append(MinuteGrid(symbol, day, returns, volume))
    return grids


def group_by_day(grids: Iterable[MinuteGrid]) -> Iterator[tuple[dt.date, list[MinuteGrid]]]:
    """Yield (date, grids) for days on which every symbol is present."""
    by_day: dict[dt.date, list[MinuteGrid]] = {}
    symbols = set()
    for grid in grids:
        by_day.setdefault(grid.date, []).append(grid)
        symbols.add(grid.symbol)
    for day in sorted(by_day):
        day_grids = sorted(by_day[day], key=lambda g: g.symbol)
        if len(day_grids) == len(symbols):
            yield day, day_grids
