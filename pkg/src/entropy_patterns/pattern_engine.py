"""Sliding-window pattern extraction from 30-minute bars.

A pattern is an 8-bar window whose following 4 bars (two hours) contain a
decisive +/- swing of at least `swing_points` relative to the window's last
close. Each window is encoded as 32 features, bar-major: for bar j the
entries (4j..4j+3) are (H-L, C-O, H-O, O-L) in raw price points.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MalformedLineError,
    SeriesTooShortError,
    WrongWindowLengthError,
)
from .market_data import MINUTE, BarSeries
from .validation import BUY, SELL

PATTERN_SCHEMA_VERSION = 1
FEATURES_PER_BAR = 4


@dataclass
class LabelingConfig:
    window_bars: int = 8
    horizon_bars: int = 4
    swing_points: float = 15.0
    pnl_mode: str = "max"  # or "mean": average favorable excursion over the horizon

    def __post_init__(self):
        if self.window_bars <= 0 or self.horizon_bars <= 0 or self.swing_points <= 0:
            raise ValueError("window_bars, horizon_bars and swing_points must be positive")
        if self.pnl_mode not in ("max", "mean"):
            raise ValueError(f"pnl_mode must be 'max' or 'mean', got {self.pnl_mode!r}")

    @property
    def n_features(self) -> int:
        return FEATURES_PER_BAR * self.window_bars


@dataclass
class Pattern:
    """One labeled window: feature vector, swing direction, favorable excursion."""

    id: int
    origin: np.datetime64
    features: np.ndarray = field(repr=False)
    label: str
    pnl_raw: float

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.label not in (BUY, SELL):
            raise ValueError(f"label must be {BUY!r} or {SELL!r}, got {self.label!r}")


def featurize(window, n_bars: int = 8) -> np.ndarray:
    """Encode `n_bars` OHLC bars (or a BarSeries slice) as a 4*n_bars vector."""
    if isinstance(window, BarSeries):
        o, h, lo, c = window.opens, window.highs, window.lows, window.closes
    else:
        bars = list(window)
        o = np.array([b.open for b in bars])
        h = np.array([b.high for b in bars])
        lo = np.array([b.low for b in bars])
        c = np.array([b.close for b in bars])
    if len(o) != n_bars:
        raise WrongWindowLengthError(f"expected {n_bars} bars, got {len(o)}")
    out = np.empty(FEATURES_PER_BAR * n_bars, dtype=np.float64)
    out[0::4] = h - lo
    out[1::4] = c - o
    out[2::4] = h - o
    out[3::4] = o - lo
    return out


def extract_patterns(series: BarSeries, cfg: LabelingConfig = None) -> list:
    """Emit labeled patterns for every admissible window, ordered by origin.

    A window is admissible when the window plus horizon span has no calendar
    gap wider than one interval, the horizon breaches exactly one of the two
    swing thresholds first, and no horizon bar breaches both (ambiguous).
    """
    cfg = cfg or LabelingConfig()
    W, Hz = cfg.window_bars, cfg.horizon_bars
    span = W + Hz
    if len(series) < span:
        raise SeriesTooShortError(
            f"need at least {span} bars for window {W} + horizon {Hz}, got {len(series)}"
        )
    n_windows = len(series) - span + 1

    # gap rule: consecutive stamps inside the span may differ by <= 2 intervals
    step = series.interval_minutes * MINUTE
    diffs = np.diff(series.timestamps)
    gap = np.r_[0, np.cumsum(diffs > 2 * step)]
    contiguous = gap[span - 1 :] == gap[: n_windows]

    sw = np.lib.stride_tricks.sliding_window_view
    entry = series.closes[W - 1 : W - 1 + n_windows]
    hz_high = sw(series.highs, Hz)[W : W + n_windows]
    hz_low = sw(series.lows, Hz)[W : W + n_windows]

    up = hz_high >= entry[:, None] + cfg.swing_points
    down = hz_low <= entry[:, None] - cfg.swing_points
    ambiguous = (up & down).any(axis=1)
    t_up = np.where(up.any(axis=1), up.argmax(axis=1), Hz)
    t_down = np.where(down.any(axis=1), down.argmax(axis=1), Hz)

    is_buy = contiguous & ~ambiguous & (t_up < t_down)
    is_sell = contiguous & ~ambiguous & (t_down < t_up)

    up_exc = hz_high - entry[:, None]
    down_exc = entry[:, None] - hz_low
    if cfg.pnl_mode == "max":
        pnl = np.where(is_buy, up_exc.max(axis=1), down_exc.max(axis=1))
    else:
        pnl = np.where(is_buy, up_exc.mean(axis=1), down_exc.mean(axis=1))

    patterns = []
    for pid, i in enumerate(np.flatnonzero(is_buy | is_sell)):
        patterns.append(
            Pattern(
                id=pid,
                origin=series.timestamps[i],
                features=featurize(series.slice(i, i + W), W),
                label=BUY if is_buy[i] else SELL,
                pnl_raw=float(pnl[i]),
            )
        )
    return patterns


def feature_matrix(patterns) -> np.ndarray:
    """Stack pattern feature vectors into an (n, 32) float matrix."""
    return np.array([p.features for p in patterns], dtype=np.float64)


def labels_of(patterns) -> np.ndarray:
    return np.array([p.label for p in patterns], dtype=object)


def _format_floats(values) -> str:
    return ",".join(repr(v) for v in np.asarray(values, dtype=np.float64).tolist())


def write_patterns_csv(patterns, path, n_features: int = None) -> None:
    patterns = list(patterns)
    if n_features is None:
        n_features = len(patterns[0].features) if patterns else 32
    header = "id,origin_iso8601,label,pnl_raw," + ",".join(
        f"f{i}" for i in range(n_features)
    )
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for p in patterns:
            origin = np.datetime_as_string(np.datetime64(p.origin, "s"), unit="s")
            fh.write(f"{p.id},{origin},{p.label},{float(p.pnl_raw)!r},{_format_floats(p.features)}\n")


def read_patterns_csv(path) -> list:
    patterns = []
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("id,origin_iso8601,label,pnl_raw,f0"):
            raise MalformedLineError(1, header, "unexpected patterns CSV header")
        n_features = len(header.split(",")) - 4
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4 + n_features:
                raise MalformedLineError(
                    lineno, line, f"expected {4 + n_features} fields, got {len(parts)}"
                )
            try:
                patterns.append(
                    Pattern(
                        id=int(parts[0]),
                        origin=np.datetime64(parts[1], "s"),
                        features=np.array([float(x) for x in parts[4:]]),
                        label=parts[2],
                        pnl_raw=float(parts[3]),
                    )
                )
            except ValueError as exc:
                raise MalformedLineError(lineno, line, str(exc)) from None
    return patterns


def write_patterns_json(patterns, path) -> None:
    doc = {
        "schema_version": PATTERN_SCHEMA_VERSION,
        "feature_layout": "bar-major (H-L, C-O, H-O, O-L) per bar",
        "patterns": [
            {
                "id": p.id,
                "origin": np.datetime_as_string(np.datetime64(p.origin, "s"), unit="s"),
                "label": p.label,
                "pnl_raw": float(p.pnl_raw),
                "features": np.asarray(p.features, dtype=np.float64).tolist(),
            }
            for p in patterns
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_patterns_json(path) -> list:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != PATTERN_SCHEMA_VERSION:
        raise MalformedLineError(
            1, str(doc.get("schema_version")), "unsupported pattern schema version"
        )
    return [
        Pattern(
            id=rec["id"],
            origin=np.datetime64(rec["origin"], "s"),
            features=np.array(rec["features"], dtype=np.float64),
            label=rec["label"],
            pnl_raw=float(rec["pnl_raw"]),
        )
        for rec in doc["patterns"]
    ]
