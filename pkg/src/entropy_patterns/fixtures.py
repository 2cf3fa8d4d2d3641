"""Synthetic data generators with known ground truth.

Two kinds of fixtures:

* planted-swing bar series: a quiet sine-plus-noise price path with sharp
  ramps inserted at chosen offsets. Ramp geometry (+4 points per bar over 4
  bars, 16 total) guarantees the +/-15 threshold is crossed only on the
  final ramp bar, so exactly one window per ramp qualifies and its origin
  is known in advance.
* feature-space pattern clouds: labeled 32-dim point sets with a planted
  cluster structure (a mixed region plus two pure lobes), for exercising
  scoring, filtering and the clustering baselines without price data.
"""

from dataclasses import dataclass

import numpy as np

from .market_data import BarSeries
from .pattern_engine import Pattern
from .validation import BUY, SELL

RAMP_BARS = 4
RAMP_STEP = 4.0  # crosses a 15-point threshold only on the 4th bar


@dataclass
class PlantedSwings:
    series: BarSeries
    ramp_starts: list  # list of (bar index of first ramp bar, +1 buy / -1 sell)
    window_bars: int = 8

    @property
    def expected_origins(self) -> list:
        return [
            (self.series.timestamps[s - self.window_bars], BUY if d > 0 else SELL)
            for s, d in self.ramp_starts
        ]


def make_planted_series(
    n_bars: int,
    ramps,
    seed: int = 0,
    base: float = 1200.0,
    interval: int = 30,
    start: str = "2017-01-02T00:00:00",
) -> PlantedSwings:
    """Quiet series with swing ramps planted at the given (index, direction) pairs.

    Ramp indices must leave room for an 8-bar window before and stay at
    least 12 bars apart so no window sees two ramps.
    """
    ramps = sorted(ramps)
    for (a, _), (b, _) in zip(ramps, ramps[1:]):
        if b - a < 12:
            raise ValueError(f"ramps at {a} and {b} are closer than 12 bars")
    if ramps and (ramps[0][0] < 8 or ramps[-1][0] + RAMP_BARS > n_bars):
        raise ValueError("ramps must fit inside the series with an 8-bar lead-in")

    rng = np.random.default_rng(seed)
    # quiet path: slow sine, tiny jitter; each ramp adds a permanent step
    drift = np.zeros(n_bars)
    for s, d in ramps:
        ramp = np.zeros(n_bars)
        ramp[s : s + RAMP_BARS] = d * RAMP_STEP
        drift += np.cumsum(ramp)
    closes = base + 1.0 * np.sin(np.arange(n_bars) / 9.0) + rng.normal(0.0, 0.2, n_bars) + drift
    opens = np.r_[closes[0], closes[:-1]]
    wiggle = rng.uniform(0.05, 0.3, n_bars)
    highs = np.maximum(opens, closes) + wiggle
    lows = np.minimum(opens, closes) - rng.uniform(0.05, 0.3, n_bars)

    ts = np.datetime64(start, "s") + np.arange(n_bars) * np.timedelta64(interval, "m")
    series = BarSeries("FIXTURE", interval, ts, opens, highs, lows, closes)
    return PlantedSwings(series, [(s, d) for s, d in ramps])


def default_ramp_plan(n_bars: int, n_ramps: int, seed: int = 0) -> list:
    """Evenly spaced ramps with alternating direction and jittered offsets."""
    rng = np.random.default_rng(seed)
    if n_ramps == 0:
        return []
    spacing = (n_bars - 24) // n_ramps
    if spacing < 16:
        raise ValueError(f"{n_bars} bars is too short for {n_ramps} ramps")
    starts = 10 + spacing * np.arange(n_ramps) + rng.integers(0, spacing - 14, n_ramps)
    return [(int(s), 1 if i % 2 == 0 else -1) for i, s in enumerate(starts)]


def expand_to_minutes(series: BarSeries) -> str:
    """Render a 30-minute series as histdata-style M1 CSV text.

    Each bar becomes `interval` one-minute bars tracing open -> high -> low
    -> close, so aggregating the output reproduces the input exactly.
    """
    lines = []
    interval = series.interval_minutes
    minute = np.timedelta64(1, "m")
    for i in range(len(series)):
        o, h, lo, c = (
            series.opens[i],
            series.highs[i],
            series.lows[i],
            series.closes[i],
        )
        # piecewise-linear minute path hitting all four marks
        thirds = np.array_split(np.arange(interval + 1), 3)
        path = np.concatenate(
            [
                np.linspace(o, h, len(thirds[0])),
                np.linspace(h, lo, len(thirds[1]) + 1)[1:],
                np.linspace(lo, c, len(thirds[2]) + 1)[1:],
            ]
        )
        t0 = series.timestamps[i]
        for m in range(interval):
            po, pc = path[m], path[m + 1]
            stamp = (t0 + m * minute).astype("datetime64[s]").item()
            lines.append(
                f"{stamp:%Y%m%d %H%M%S};{po:.6f};{max(po, pc):.6f};{min(po, pc):.6f};{pc:.6f};0"
            )
    return "\n".join(lines) + "\n"


def _pattern(pid: int, vec: np.ndarray, label: str, pnl: float, t0, minutes: int) -> Pattern:
    origin = np.datetime64(t0, "s") + np.timedelta64(minutes, "m")
    return Pattern(id=pid, origin=origin, features=vec, label=label, pnl_raw=pnl)


def make_pattern_clouds(
    n_mixed: int = 600,
    n_pure: int = 60,
    separation: float = 40.0,
    jitter: float = 0.5,
    seed: int = 0,
) -> list:
    """Labeled 32-dim pattern set: one mixed blob and two pure lobes.

    The mixed blob holds interleaved Buy/Sell points around a common
    prototype; the lobes sit `separation` L1-units away (spread over all
    coordinates) and are single-label. Local entropy is high in the blob
    and zero in the lobes, and K-means/GMM on geometry alone will split
    blob vs lobes rather than Buy vs Sell.
    """
    rng = np.random.default_rng(seed)
    d = 32
    proto = np.full(d, 3.0)
    offset = np.full(d, separation / d)  # L1 shift = separation
    pats = []
    t0 = "2017-01-02T00:00:00"
    for i in range(n_mixed):
        vec = proto + rng.uniform(-jitter, jitter, d)
        label = BUY if i % 2 == 0 else SELL
        pats.append(_pattern(len(pats), vec, label, 15.0 + rng.uniform(0, 10), t0, 30 * len(pats)))
    for i in range(n_pure):
        vec = proto + offset + rng.uniform(-jitter, jitter, d)
        pats.append(_pattern(len(pats), vec, BUY, 15.0 + rng.uniform(0, 10), t0, 30 * len(pats)))
    for i in range(n_pure):
        vec = proto - offset + rng.uniform(-jitter, jitter, d)
        pats.append(_pattern(len(pats), vec, SELL, 15.0 + rng.uniform(0, 10), t0, 30 * len(pats)))
    return pats
