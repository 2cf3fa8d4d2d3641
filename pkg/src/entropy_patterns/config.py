"""Run configuration: one flat key=value file driving every pipeline stage.

The file format is deliberately minimal so that runs are reproducible and
scriptable: one `key = value` pair per line, full-line comments starting
with `#`, blank lines ignored.  Every key can also be overridden by a
same-named command line flag.
"""

import dataclasses
import typing
from dataclasses import dataclass

from .errors import ConfigError

CONFIG_SCHEMA_VERSION = 1

PNL_MODES = ("max", "mean")


@dataclass
class RunConfig:
    """Every tunable of the pipeline in one place.

    Defaults follow the common setup for 30-minute XAUUSD bars: 8-bar
    windows, 4-bar horizon, 15-point swings, k=25 neighbors, alpha=0.8.
    """

    # data
    raw_csv: str = ""
    test_csv: str = ""
    symbol: str = "XAUUSD"
    bar_interval: int = 30
    drop_partial: bool = False

    # pattern extraction
    window_bars: int = 8
    horizon_bars: int = 4
    swing_points: float = 15.0
    pnl_mode: str = "max"

    # scoring
    k: int = 25
    alpha: float = 0.8
    standardize: bool = False
    normalize_ig: bool = False

    # filtering; theta=None means "pick the 5th-percentile default"
    theta: float | None = None

    # backtest; match_theta=None means "reuse the filter threshold"
    match_theta: float | None = None
    target: float = 15.0
    stop: float = 15.0
    one_open_trade: bool = True
    optimistic_fills: bool = False
    cost_per_trade: float = 0.0
    initial_capital: float = 10000.0
    point_value: float = 1.0
    allow_train_overlap: bool = False
    sweep_targets: tuple[float, ...] = (10.0, 15.0, 20.0)
    sweep_stops: tuple[float, ...] = (10.0, 15.0, 20.0)

    # reporting / plumbing
    bins: int = 50
    seed: int = 0
    out_dir: str = "out"
    threads: int = 0

    def __post_init__(self):
        if self.bar_interval < 1:
            raise ConfigError(f"bar_interval must be >= 1, got {self.bar_interval}")
        if self.window_bars < 1 or self.horizon_bars < 1:
            raise ConfigError("window_bars and horizon_bars must be >= 1")
        if self.swing_points <= 0:
            raise ConfigError(f"swing_points must be positive, got {self.swing_points}")
        if self.pnl_mode not in PNL_MODES:
            raise ConfigError(f"pnl_mode must be one of {PNL_MODES}, got {self.pnl_mode!r}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.theta is not None and self.theta <= 0:
            raise ConfigError(f"theta must be positive, got {self.theta}")
        if self.match_theta is not None and self.match_theta <= 0:
            raise ConfigError(f"match_theta must be positive, got {self.match_theta}")
        if self.target <= 0 or self.stop <= 0:
            raise ConfigError("target and stop must be positive")
        if self.cost_per_trade < 0:
            raise ConfigError("cost_per_trade must be >= 0")
        if self.initial_capital <= 0 or self.point_value <= 0:
            raise ConfigError("initial_capital and point_value must be positive")
        if not self.sweep_targets or not self.sweep_stops:
            raise ConfigError("sweep_targets and sweep_stops must be nonempty")
        if any(v <= 0 for v in self.sweep_targets + self.sweep_stops):
            raise ConfigError("sweep targets and stops must all be positive")
        if self.bins < 1:
            raise ConfigError(f"bins must be >= 1, got {self.bins}")
        if self.threads < 0:
            raise ConfigError(f"threads must be >= 0, got {self.threads}")
        if not self.out_dir:
            raise ConfigError("out_dir must be a nonempty path")

    def to_dict(self) -> dict:
        """JSON-safe mapping, used verbatim inside run manifests."""
        out = dataclasses.asdict(self)
        out["sweep_targets"] = list(self.sweep_targets)
        out["sweep_stops"] = list(self.sweep_stops)
        out["config_schema_version"] = CONFIG_SCHEMA_VERSION
        return out


_FIELD_TYPES = typing.get_type_hints(RunConfig)
_FIELD_NAMES = tuple(f.name for f in dataclasses.fields(RunConfig))

_TRUE = ("true", "1", "yes", "on")
_FALSE = ("false", "0", "no", "off")


def _coerce(key: str, raw: str):
    """Parse the string form of one config value into its declared type."""
    tp = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if tp is str:
            return raw
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if tp == float | None:
            if raw.lower() in ("", "none"):
                return None
            return float(raw)
        if tp == tuple[float, ...]:
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None
    raise ConfigError(f"no parser for config key {key!r}")  # pragma: no cover


def parse_config_text(text: str) -> dict:
    """Parse flat key=value text into a typed mapping of known keys."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_NAMES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config(path: str | None = None) -> RunConfig:
    """Build a RunConfig from a config file, or pure defaults when path is None."""
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
    return RunConfig(**parse_config_text(text))


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Return cfg with non-None override values substituted in."""
    changes = {k: v for k, v in overrides.items() if k in _FIELD_NAMES and v is not None}
    if not changes:
        return cfg
    return dataclasses.replace(cfg, **changes)


def write_default_config(path) -> None:
    """Write a fully commented config file holding the defaults."""
    cfg = RunConfig()
    lines = [
        "# Pipeline configuration: one key = value per line, '#' starts a comment.",
        "# Every key can be overridden on the command line by --<key>.",
        "",
    ]
    for f in dataclasses.fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            rendered = ",".join(repr(v) for v in value)
        elif value is None:
            rendered = "none"
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{f.name} = {rendered}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
