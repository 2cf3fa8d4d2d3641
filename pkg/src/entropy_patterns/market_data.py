"""Minute-level OHLC ingestion and fixed-interval bar aggregation.

The expected raw format is the histdata.com "Generic ASCII" M1 layout: one
record per line, `YYYYMMDD HHMMSS;open;high;low;close;volume` with `;`
separators. Volume is parsed and discarded. Timestamps are treated as naive
local-exchange time; no timezone conversion is applied anywhere.
"""

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import (
    IntervalMismatchError,
    InvalidBarError,
    MalformedLineError,
    NonMonotonicTimestampError,
)

MINUTE = np.timedelta64(1, "m")


@dataclass(frozen=True)
class OhlcBar:
    """One aggregated price bar; prices in quote-currency points."""

    timestamp: np.datetime64
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        if not (
            self.low <= self.open <= self.high
            and self.low <= self.close <= self.high
        ):
            raise ValueError(
                f"invalid OHLC bar at {self.timestamp}: "
                f"{self.open}/{self.high}/{self.low}/{self.close}"
            )


@dataclass
class BarSeries:
    """Ordered bars of one instrument at a fixed interval.

    Timestamps are strictly increasing and consecutive bars differ by an
    integer multiple of the interval; gaps (market closures) are simply
    absent buckets, never zero-filled.
    """

    symbol: str
    interval_minutes: int
    timestamps: np.ndarray = field(default_factory=lambda: np.empty(0, "datetime64[s]"))
    opens: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))
    highs: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))
    lows: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))
    closes: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))

    def __len__(self) -> int:
        return len(self.timestamps)

    def bar(self, i: int) -> OhlcBar:
        return OhlcBar(
            self.timestamps[i],
            float(self.opens[i]),
            float(self.highs[i]),
            float(self.lows[i]),
            float(self.closes[i]),
        )

    def __iter__(self) -> Iterator[OhlcBar]:
        return (self.bar(i) for i in range(len(self)))

    def slice(self, start: int, stop: int) -> "BarSeries":
        return BarSeries(
            self.symbol,
            self.interval_minutes,
            self.timestamps[start:stop],
            self.opens[start:stop],
            self.highs[start:stop],
            self.lows[start:stop],
            self.closes[start:stop],
        )

    @property
    def start(self) -> np.datetime64:
        return self.timestamps[0]

    @property
    def end(self) -> np.datetime64:
        return self.timestamps[-1]


def _parse_timestamp(text: str) -> np.datetime64:
    # "YYYYMMDD HHMMSS" -> datetime64[s]; raises ValueError on bad fields
    if len(text) != 15 or text[8] != " " or not (text[:8] + text[9:]).isdigit():
        raise ValueError(f"bad timestamp {text!r}")
    iso = (
        f"{text[0:4]}-{text[4:6]}-{text[6:8]}T"
        f"{text[9:11]}:{text[11:13]}:{text[13:15]}"
    )
    return np.datetime64(iso, "s")


def parse_histdata_csv(raw, symbol: str = "") -> BarSeries:
    """Parse histdata M1 CSV text (a string or file-like) into a 1-minute BarSeries.

    Raises MalformedLineError on field-count or numeric failures,
    NonMonotonicTimestampError on duplicates/ordering violations, and
    InvalidBarError when a bar breaks the OHLC invariants. Line numbers in
    errors are 1-based positions in the input.
    """
    if hasattr(raw, "read"):
        raw = raw.read()
    timestamps = []
    numbers = []
    linenos = []
    contents = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(";")
        if len(parts) != 6:
            raise MalformedLineError(lineno, line, f"expected 6 fields, got {len(parts)}")
        try:
            ts = _parse_timestamp(parts[0])
            o, h, lo, c, _volume = (float(p) for p in parts[1:6])
        except ValueError as exc:
            raise MalformedLineError(lineno, line, str(exc)) from None
        timestamps.append(ts)
        numbers.append((o, h, lo, c))
        linenos.append(lineno)
        contents.append(line)

    if not timestamps:
        return BarSeries(symbol, 1)

    ts = np.array(timestamps, dtype="datetime64[s]")
    ohlc = np.array(numbers, dtype=np.float64)
    opens, highs, lows, closes = ohlc.T

    diffs = np.diff(ts.astype(np.int64))
    bad = np.flatnonzero(diffs <= 0)
    if bad.size:
        i = int(bad[0]) + 1
        kind = "duplicate timestamp" if diffs[bad[0]] == 0 else "timestamp out of order"
        raise NonMonotonicTimestampError(linenos[i], f"{kind}: {ts[i]}")

    invalid = (lows > opens) | (opens > highs) | (lows > closes) | (closes > highs)
    bad = np.flatnonzero(invalid)
    if bad.size:
        i = int(bad[0])
        raise InvalidBarError(linenos[i], contents[i])

    return BarSeries(symbol, 1, ts, opens, highs, lows, closes)


def aggregate(series: BarSeries, target_interval: int, drop_partial: bool = False) -> BarSeries:
    """Merge bars into clock-aligned buckets of `target_interval` minutes.

    Per bucket: open of the first bar, max high, min low, close of the last
    bar. Buckets with no source bars are omitted. An incomplete trailing
    bucket is kept unless drop_partial is set; incomplete interior buckets
    (gaps) are always kept.
    """
    if target_interval <= 0 or target_interval % series.interval_minutes != 0:
        raise IntervalMismatchError(
            f"target interval {target_interval} is not a positive multiple of "
            f"source interval {series.interval_minutes}"
        )
    ratio = target_interval // series.interval_minutes
    if len(series) == 0:
        return BarSeries(series.symbol, target_interval)

    minutes = series.timestamps.astype("datetime64[m]").astype(np.int64)
    bucket = minutes // target_interval
    starts = np.flatnonzero(np.r_[True, bucket[1:] != bucket[:-1]])
    ends = np.r_[starts[1:], len(bucket)] - 1

    out = BarSeries(
        series.symbol,
        target_interval,
        (bucket[starts] * target_interval).astype("datetime64[m]").astype("datetime64[s]"),
        series.opens[starts].copy(),
        np.maximum.reduceat(series.highs, starts),
        np.minimum.reduceat(series.lows, starts),
        series.closes[ends].copy(),
    )
    if drop_partial and len(out) and (ends[-1] - starts[-1] + 1) < ratio:
        out = out.slice(0, len(out) - 1)
    return out


def write_bars_csv(series: BarSeries, path) -> None:
    """Write `timestamp_iso8601,open,high,low,close` rows (deterministic)."""
    with open(path, "w") as fh:
        fh.write("timestamp_iso8601,open,high,low,close\n")
        times = np.datetime_as_string(series.timestamps, unit="s")
        cols = [x.tolist() for x in (series.opens, series.highs, series.lows, series.closes)]
        for i in range(len(series)):
            fh.write(
                f"{times[i]},{cols[0][i]!r},{cols[1][i]!r},{cols[2][i]!r},{cols[3][i]!r}\n"
            )


def read_bars_csv(path, interval_minutes: int, symbol: str = "") -> BarSeries:
    timestamps = []
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "timestamp_iso8601,open,high,low,close":
            raise MalformedLineError(1, header, "unexpected bars CSV header")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise MalformedLineError(lineno, line, f"expected 5 fields, got {len(parts)}")
            try:
                timestamps.append(np.datetime64(parts[0], "s"))
                rows.append(tuple(float(p) for p in parts[1:]))
            except ValueError as exc:
                raise MalformedLineError(lineno, line, str(exc)) from None
    if not timestamps:
        return BarSeries(symbol, interval_minutes)
    ohlc = np.array(rows, dtype=np.float64)
    return BarSeries(
        symbol,
        interval_minutes,
        np.array(timestamps, dtype="datetime64[s]"),
        ohlc[:, 0].copy(),
        ohlc[:, 1].copy(),
        ohlc[:, 2].copy(),
        ohlc[:, 3].copy(),
    )
