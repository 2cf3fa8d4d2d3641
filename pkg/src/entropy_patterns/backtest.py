"""Target/stop trade simulation against a filtered pattern library.

At every bar whose preceding 8-bar window matches a library pattern within
`match_theta` (L1), a one-unit trade enters at that bar's open and is then
monitored bar by bar until the fixed target or stop distance is reached.
When one bar spans both exits the stop is assumed to fill first; intra-bar
ordering is unknowable from 30-minute bars, so the conservative reading is
the default and `optimistic_fills` flips it.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyLibraryError,
    LibraryTrainOverlapError,
    MalformedLineError,
)
from .market_data import MINUTE, BarSeries
from .quality_filter import FilteredLibrary
from .validation import BUY, SELL

SWEEP_SCHEMA_VERSION = 1

TARGET = "Target"
STOP = "Stop"
END_OF_DATA = "EndOfData"


@dataclass
class BacktestConfig:
    target: float = 15.0
    stop: float = 15.0
    match_theta: float = 10.0
    one_open_trade: bool = True
    initial_capital: float = 10000.0
    point_value: float = 1.0
    window_bars: int = 8
    optimistic_fills: bool = False
    cost_per_trade: float = 0.0
    allow_train_overlap: bool = False

    def __post_init__(self):
        if self.target <= 0 or self.stop <= 0 or self.match_theta <= 0:
            raise ValueError("target, stop and match_theta must be positive")


@dataclass
class TradeRecord:
    entry_time: np.datetime64
    direction: str
    entry_price: float
    exit_time: np.datetime64
    exit_price: float
    outcome: str
    pnl: float  # signed points, net of cost_per_trade
    matched_id: int = None
    match_distance: float = None


@dataclass
class MatchSignal:
    label: str
    matched_id: int
    distance: float


@dataclass
class EquitySummary:
    total_return: float
    trade_count: int
    hit_rate: float
    max_drawdown: float


@dataclass
class EquityCurve:
    timestamps: np.ndarray
    capital: np.ndarray
    summary: EquitySummary

    @property
    def final(self) -> float:
        return float(self.capital[-1])


def _admitted_arrays(library: FilteredLibrary):
    admitted = library.buys + library.sells
    feats = np.array([sp.features for sp in admitted], dtype=np.float64)
    ids = np.array([sp.pattern.id for sp in admitted])
    labels = np.array([sp.label for sp in admitted], dtype=object)
    return feats, ids, labels


def match(window_features, library: FilteredLibrary, match_theta: float) -> MatchSignal:
    """Nearest admitted pattern within match_theta, or None.

    Nearest by L1 over Buy and Sell sides together; when a Buy and a Sell
    tie exactly, the lower pattern id wins.
    """
    feats, ids, labels = _admitted_arrays(library)
    if len(feats) == 0:
        raise EmptyLibraryError("library has no admitted patterns")
    w = np.asarray(window_features, dtype=np.float64)
    dist = np.abs(feats - w[None, :]).sum(axis=1)
    order = np.lexsort((ids, dist))
    best = order[0]
    if dist[best] < match_theta:
        return MatchSignal(str(labels[best]), int(ids[best]), float(dist[best]))
    return None


def _window_features(series: BarSeries, window_bars: int) -> np.ndarray:
    per_bar = np.stack(
        [
            series.highs - series.lows,
            series.closes - series.opens,
            series.highs - series.opens,
            series.opens - series.lows,
        ],
        axis=1,
    )
    sw = np.lib.stride_tricks.sliding_window_view(per_bar, (window_bars, 4))
    return sw.reshape(len(series) - window_bars + 1, window_bars * 4)


def _spans_overlap(library: FilteredLibrary, series: BarSeries) -> bool:
    origins = [sp.pattern.origin for sp in library.scored]
    if not origins or len(series) == 0:
        return False
    lib_min, lib_max = min(origins), max(origins)
    return lib_min <= series.end and series.start <= lib_max


def _exit_scan(series, j0, direction, entry, cfg):
    """First bar index >= j0 reaching target or stop, with the tie rule."""
    if direction == BUY:
        hit_target = series.highs[j0:] >= entry + cfg.target
        hit_stop = series.lows[j0:] <= entry - cfg.stop
    else:
        hit_target = series.lows[j0:] <= entry - cfg.target
        hit_stop = series.highs[j0:] >= entry + cfg.stop
    either = hit_target | hit_stop
    if not either.any():
        return None
    j = j0 + int(either.argmax())
    t, s = hit_target[j - j0], hit_stop[j - j0]
    if t and s:
        outcome = TARGET if cfg.optimistic_fills else STOP
    else:
        outcome = TARGET if t else STOP
    return j, outcome


def _close_trade(series, j, outcome, direction, entry, cfg):
    interval = series.interval_minutes * MINUTE
    if outcome == TARGET:
        pnl = cfg.target
        exit_price = entry + cfg.target if direction == BUY else entry - cfg.target
    elif outcome == STOP:
        pnl = -cfg.stop
        exit_price = entry - cfg.stop if direction == BUY else entry + cfg.stop
    else:
        exit_price = float(series.closes[j])
        pnl = exit_price - entry if direction == BUY else entry - exit_price
    return float(pnl - cfg.cost_per_trade), float(exit_price), series.timestamps[j] + interval


def run_backtest(series: BarSeries, library: FilteredLibrary, cfg: BacktestConfig):
    """Replay the series against the library; returns (EquityCurve, trades).

    The series must be disjoint in time from the span the library was built
    on; `allow_train_overlap` downgrades that error to a warning for
    deliberate in-sample experiments.
    """
    if _spans_overlap(library, series):
        if not cfg.allow_train_overlap:
            raise LibraryTrainOverlapError(
                "series overlaps the library's training span; "
                "pass allow_train_overlap to run anyway"
            )
        warnings.warn("backtest series overlaps the library training span", stacklevel=2)

    W = cfg.window_bars
    n = len(series)
    trades = []
    feats, ids, labels = _admitted_arrays(library)
    if n > W and len(feats):
        F = _window_features(series, W)
        step = series.interval_minutes * MINUTE
        diffs = np.diff(series.timestamps)
        # entry bar i is admissible when bars [i-W, i] have no oversized gap
        gap_ok = np.r_[0, np.cumsum(diffs > 2 * step)]
        busy_until = -1
        for i in range(W, n):
            if cfg.one_open_trade and i <= busy_until:
                continue
            if gap_ok[i] != gap_ok[i - W]:
                continue
            w = F[i - W]
            dist = np.abs(feats - w[None, :]).sum(axis=1)
            order = np.lexsort((ids, dist))
            best = order[0]
            if not dist[best] < cfg.match_theta:
                continue
            direction = str(labels[best])
            entry = float(series.opens[i])
            hit = _exit_scan(series, i, direction, entry, cfg)
            if hit is None:
                j, outcome = n - 1, END_OF_DATA
            else:
                j, outcome = hit
            pnl, exit_price, exit_time = _close_trade(series, j, outcome, direction, entry, cfg)
            trades.append(
                TradeRecord(
                    entry_time=series.timestamps[i],
                    direction=direction,
                    entry_price=entry,
                    exit_time=exit_time,
                    exit_price=exit_price,
                    outcome=outcome,
                    pnl=pnl,
                    matched_id=int(ids[best]),
                    match_distance=float(dist[best]),
                )
            )
            busy_until = j

    curve = build_equity_curve(series, trades, cfg)
    return curve, trades


def build_equity_curve(series: BarSeries, trades, cfg: BacktestConfig) -> EquityCurve:
    start = series.timestamps[0] if len(series) else np.datetime64("1970-01-01", "s")
    times = [start]
    capital = [cfg.initial_capital]
    cap = cfg.initial_capital
    closed = sorted(trades, key=lambda t: (t.exit_time, t.entry_time))
    for t in closed:
        cap += t.pnl * cfg.point_value
        times.append(t.exit_time)
        capital.append(cap)
    capital = np.array(capital, dtype=np.float64)
    peak = np.maximum.accumulate(capital)
    with np.errstate(invalid="ignore"):
        drawdown = np.where(peak > 0, (peak - capital) / peak, 0.0)
    wins = sum(1 for t in trades if t.pnl > 0)
    summary = EquitySummary(
        total_return=(cap - cfg.initial_capital) / cfg.initial_capital,
        trade_count=len(trades),
        hit_rate=wins / len(trades) if trades else 0.0,
        max_drawdown=float(drawdown.max()) if len(capital) else 0.0,
    )
    return EquityCurve(np.array(times, dtype="datetime64[s]"), capital, summary)


@dataclass
class SweepCell:
    target: float
    stop: float
    final_equity: float
    total_return: float
    trade_count: int
    hit_rate: float
    max_drawdown: float


def parameter_sweep(series, library, targets, stops, cfg: BacktestConfig = None) -> list:
    """One backtest per (target, stop) pair, row-major over the grids."""
    base = cfg or BacktestConfig()
    cells = []
    for target in targets:
        for stop in stops:
            run_cfg = BacktestConfig(
                target=target,
                stop=stop,
                match_theta=base.match_theta,
                one_open_trade=base.one_open_trade,
                initial_capital=base.initial_capital,
                point_value=base.point_value,
                window_bars=base.window_bars,
                optimistic_fills=base.optimistic_fills,
                cost_per_trade=base.cost_per_trade,
                allow_train_overlap=base.allow_train_overlap,
            )
            curve, trades = run_backtest(series, library, run_cfg)
            cells.append(
                SweepCell(
                    target=float(target),
                    stop=float(stop),
                    final_equity=curve.final,
                    total_return=curve.summary.total_return,
                    trade_count=curve.summary.trade_count,
                    hit_rate=curve.summary.hit_rate,
                    max_drawdown=curve.summary.max_drawdown,
                )
            )
    return cells


def write_trades_csv(trades, path) -> None:
    with open(path, "w") as fh:
        fh.write("entry_time,direction,entry_price,exit_time,exit_price,outcome,pnl\n")
        for t in trades:
            entry = np.datetime_as_string(np.datetime64(t.entry_time, "s"), unit="s")
            fexit = np.datetime_as_string(np.datetime64(t.exit_time, "s"), unit="s")
            fh.write(
                f"{entry},{t.direction},{float(t.entry_price)!r},{fexit},"
                f"{float(t.exit_price)!r},{t.outcome},{float(t.pnl)!r}\n"
            )


def read_trades_csv(path) -> list:
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "entry_time,direction,entry_price,exit_time,exit_price,outcome,pnl":
            raise MalformedLineError(1, header, "unexpected trades CSV header")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise MalformedLineError(lineno, line, f"expected 7 fields, got {len(parts)}")
            try:
                out.append(
                    TradeRecord(
                        entry_time=np.datetime64(parts[0], "s"),
                        direction=parts[1],
                        entry_price=float(parts[2]),
                        exit_time=np.datetime64(parts[3], "s"),
                        exit_price=float(parts[4]),
                        outcome=parts[5],
                        pnl=float(parts[6]),
                    )
                )
            except ValueError as exc:
                raise MalformedLineError(lineno, line, str(exc)) from None
    return out


def write_equity_csv(curve: EquityCurve, path) -> None:
    with open(path, "w") as fh:
        fh.write("time,capital\n")
        times = np.datetime_as_string(curve.timestamps, unit="s")
        for i in range(len(curve.capital)):
            fh.write(f"{times[i]},{float(curve.capital[i])!r}\n")


def write_sweep_json(cells, cfg: BacktestConfig, path) -> None:
    doc = {
        "schema_version": SWEEP_SCHEMA_VERSION,
        "initial_capital": cfg.initial_capital,
        "point_value": cfg.point_value,
        "match_theta": cfg.match_theta,
        "cells": [
            {
                "target": c.target,
                "stop": c.stop,
                "final_equity": c.final_equity,
                "total_return": c.total_return,
                "trade_count": c.trade_count,
                "hit_rate": c.hit_rate,
                "max_drawdown": c.max_drawdown,
            }
            for c in cells
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
