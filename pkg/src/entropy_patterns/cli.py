"""Subcommand front end wiring the pipeline stages together.

Stages run in this order, each reading the previous stage's artifacts from
the output directory and writing its own plus a manifest:

    ingest -> extract -> score -> filter -> baseline -> backtest -> report

`all` chains them; `fixture` writes a synthetic minute-level data set with
planted swings so the whole pipeline is testable offline; `replay` re-runs
a finished pipeline from its manifest and checks that every artifact comes
out byte-identical.

Exit codes: 1 config error, 2 data error, 3 pipeline invariant violation.
Errors are reported as one JSON object on standard error.
"""

import argparse
import dataclasses
import json
import sys
import typing
from pathlib import Path

from . import __version__
from .backtest import BacktestConfig, parameter_sweep, run_backtest, write_equity_csv, write_sweep_json, write_trades_csv
from .baselines import balance_report, format_balance_table, gmm_em, kmeans, pca_project, write_balance_json, write_projection_csv
from .config import CONFIG_SCHEMA_VERSION, RunConfig, apply_overrides, load_config
from .entropy_core import ScoringConfig, read_scored_csv, score_all, write_scored_csv
from .errors import ConfigError, MissingArtifactError, PatternToolError, PipelineInvariantError
from .fixtures import default_ramp_plan, expand_to_minutes, make_planted_series
from .market_data import aggregate, parse_histdata_csv, read_bars_csv, write_bars_csv
from .pattern_engine import LabelingConfig, extract_patterns, feature_matrix, labels_of, read_patterns_csv, write_patterns_csv, write_patterns_json
from .quality_filter import FilterConfig, default_theta, greedy_filter, load_scored_library, read_summary_json, verify, write_library_csv, write_summary_json
from .report import build_manifest, cross_distance_histogram, file_digest, histogram_shift_summary, monthly_volatility, read_manifest, write_histogram_csv, write_manifest, write_volatility_csv
from .svg import render_box_plot, render_histogram, write_svg
from .validation import BUY, SELL

# artifact file names, all relative to the output directory
BARS = "bars.csv"
PATTERNS_CSV = "patterns.csv"
PATTERNS_JSON = "patterns.json"
SCORED = "scored.csv"
LIBRARY = "library.csv"
SUMMARY = "library_summary.json"
PROJECTION = "projection.csv"
BALANCE_JSON = "balance.json"
BALANCE_TXT = "balance.txt"
TRADES = "trades.csv"
EQUITY = "equity.csv"
SWEEP = "sweep.json"
HIST_RAW = "hist_raw.csv"
HIST_FILTERED = "hist_filtered.csv"
HIST_SHIFT = "hist_shift.json"
VOLATILITY = "volatility.csv"
HIST_RAW_SVG = "hist_raw.svg"
HIST_FILTERED_SVG = "hist_filtered.svg"
VOLATILITY_SVG = "volatility.svg"
FIXTURE_TRAIN = "fixture_train.csv"
FIXTURE_TEST = "fixture_test.csv"
MANIFEST_ALL = "manifest_all.json"

# every non-manifest file the full pipeline produces, in stage order
PIPELINE_OUTPUTS = (
    BARS, PATTERNS_CSV, PATTERNS_JSON, SCORED, LIBRARY, SUMMARY,
    PROJECTION, BALANCE_JSON, BALANCE_TXT, TRADES, EQUITY, SWEEP,
    HIST_RAW, HIST_FILTERED, HIST_SHIFT, VOLATILITY,
    HIST_RAW_SVG, HIST_FILTERED_SVG, VOLATILITY_SVG,
)

FIXTURE_TRAIN_BARS = 2400
FIXTURE_TRAIN_RAMPS = 120
FIXTURE_TRAIN_START = "2017-01-02T00:00:00"
FIXTURE_TEST_BARS = 900
FIXTURE_TEST_RAMPS = 40
FIXTURE_TEST_START = "2017-04-03T00:00:00"


def _require(path: Path, producing_stage: str) -> Path:
    if not path.is_file():
        raise MissingArtifactError(path, producing_stage)
    return path


def _component(factory, **kwargs):
    """Build a stage config, turning its ValueError into a ConfigError."""
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _read_histdata(path: str, symbol: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise PatternToolError(f"cannot read price data {path!r}: {exc}") from None
    return parse_histdata_csv(text, symbol=symbol)


def _write_json(doc: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _scoring_config(cfg: RunConfig) -> ScoringConfig:
    return _component(
        ScoringConfig,
        k=cfg.k,
        alpha=cfg.alpha,
        standardize=cfg.standardize,
        normalize_ig=cfg.normalize_ig,
    )


# --- stages ----------------------------------------------------------------

def stage_ingest(cfg: RunConfig, out: Path):
    if not cfg.raw_csv:
        raise ConfigError("raw_csv must be set for the ingest stage")
    minutes = _read_histdata(cfg.raw_csv, cfg.symbol)
    bars = aggregate(minutes, cfg.bar_interval, drop_partial=cfg.drop_partial)
    write_bars_csv(bars, out / BARS)
    print(f"ingest: {len(minutes)} minute bars -> {len(bars)} {cfg.bar_interval}-minute bars")
    return {"minute_bars": len(minutes), "bars": len(bars)}, {"raw_csv": cfg.raw_csv}


def stage_extract(cfg: RunConfig, out: Path):
    bars_path = _require(out / BARS, "ingest")
    series = read_bars_csv(bars_path, cfg.bar_interval, symbol=cfg.symbol)
    lcfg = _component(
        LabelingConfig,
        window_bars=cfg.window_bars,
        horizon_bars=cfg.horizon_bars,
        swing_points=cfg.swing_points,
        pnl_mode=cfg.pnl_mode,
    )
    patterns = extract_patterns(series, lcfg)
    write_patterns_csv(patterns, out / PATTERNS_CSV, n_features=lcfg.n_features)
    write_patterns_json(patterns, out / PATTERNS_JSON)
    n_buy = sum(1 for p in patterns if p.label == BUY)
    counts = {"patterns": len(patterns), "buy": n_buy, "sell": len(patterns) - n_buy}
    print(f"extract: {counts['patterns']} patterns ({counts['buy']} Buy / {counts['sell']} Sell)")
    return counts, {"bars": bars_path}


def stage_score(cfg: RunConfig, out: Path):
    patterns_path = _require(out / PATTERNS_CSV, "extract")
    patterns = read_patterns_csv(patterns_path)
    scored = score_all(patterns, _scoring_config(cfg))
    write_scored_csv(scored, out / SCORED)
    print(f"score: {len(scored)} patterns scored (k={cfg.k}, alpha={cfg.alpha})")
    return {"scored": len(scored)}, {"patterns": patterns_path}


def stage_filter(cfg: RunConfig, out: Path):
    scored_path = _require(out / SCORED, "score")
    scored = read_scored_csv(scored_path)
    theta = cfg.theta if cfg.theta is not None else default_theta(scored)
    fcfg = _component(FilterConfig, theta=theta, scoring=_scoring_config(cfg))
    library = greedy_filter(scored, fcfg)
    report = verify(library)
    # artifacts are written before the verification gate so failures can be inspected
    write_library_csv(library, out / LIBRARY)
    write_summary_json(library, report, out / SUMMARY)
    if not report.passed:
        raise PipelineInvariantError(
            f"library verification failed: min cross-class distance "
            f"{report.min_cross_distance!r} < theta {theta!r}"
        )
    prov = library.provenance
    counts = {
        "buy_before": prov.buy_before,
        "sell_before": prov.sell_before,
        "buy_after": prov.buy_after,
        "sell_after": prov.sell_after,
        "rejected": len(prov.blocked_by),
    }
    print(
        f"filter: theta={theta:.6g}, {prov.buy_after}/{prov.buy_before} Buy and "
        f"{prov.sell_after}/{prov.sell_before} Sell admitted, separation verified"
    )
    return counts, {"scored": scored_path}


def stage_baseline(cfg: RunConfig, out: Path):
    patterns_path = _require(out / PATTERNS_CSV, "extract")
    summary_path = _require(out / SUMMARY, "filter")
    patterns = read_patterns_csv(patterns_path)
    summary = read_summary_json(summary_path)
    X = feature_matrix(patterns)
    y = labels_of(patterns)
    km = kmeans(X, k=2, seed=cfg.seed)
    gm = gmm_em(X, components=2, seed=cfg.seed)
    rows = balance_report(summary["buy_after"], summary["sell_after"], km, gm, y)
    projection = pca_project(X)
    write_projection_csv([p.id for p in patterns], y, projection, out / PROJECTION)
    write_balance_json(rows, out / BALANCE_JSON)
    with open(out / BALANCE_TXT, "w") as fh:
        fh.write(format_balance_table(rows))
    counts = {
        "kmeans_cluster_0": int(km.counts(2)[0]),
        "kmeans_cluster_1": int(km.counts(2)[1]),
        "gmm_cluster_0": int(gm.counts(2)[0]),
        "gmm_cluster_1": int(gm.counts(2)[1]),
    }
    print("baseline:\n" + format_balance_table(rows).rstrip())
    return counts, {"patterns": patterns_path, "library_summary": summary_path}


def stage_backtest(cfg: RunConfig, out: Path):
    library_path = _require(out / LIBRARY, "filter")
    summary_path = _require(out / SUMMARY, "filter")
    if not cfg.test_csv:
        raise ConfigError("test_csv must be set for the backtest stage")
    library = load_scored_library(library_path, summary_path)
    minutes = _read_histdata(cfg.test_csv, cfg.symbol)
    series = aggregate(minutes, cfg.bar_interval, drop_partial=cfg.drop_partial)
    match_theta = cfg.match_theta if cfg.match_theta is not None else library.config.theta
    bcfg = _component(
        BacktestConfig,
        target=cfg.target,
        stop=cfg.stop,
        match_theta=match_theta,
        one_open_trade=cfg.one_open_trade,
        initial_capital=cfg.initial_capital,
        point_value=cfg.point_value,
        window_bars=cfg.window_bars,
        optimistic_fills=cfg.optimistic_fills,
        cost_per_trade=cfg.cost_per_trade,
        allow_train_overlap=cfg.allow_train_overlap,
    )
    curve, trades = run_backtest(series, library, bcfg)
    cells = parameter_sweep(series, library, cfg.sweep_targets, cfg.sweep_stops, bcfg)
    write_trades_csv(trades, out / TRADES)
    write_equity_csv(curve, out / EQUITY)
    write_sweep_json(cells, bcfg, out / SWEEP)
    print(
        f"backtest: {len(trades)} trades, final equity {curve.final:.2f} "
        f"({curve.summary.total_return * 100.0:+.2f}%), {len(cells)} sweep cells"
    )
    counts = {"bars": len(series), "trades": len(trades), "sweep_cells": len(cells)}
    return counts, {
        "library": library_path,
        "library_summary": summary_path,
        "test_csv": cfg.test_csv,
    }


def stage_report(cfg: RunConfig, out: Path):
    patterns_path = _require(out / PATTERNS_CSV, "extract")
    library_path = _require(out / LIBRARY, "filter")
    summary_path = _require(out / SUMMARY, "filter")
    bars_path = _require(out / BARS, "ingest")
    patterns = read_patterns_csv(patterns_path)
    library = load_scored_library(library_path, summary_path)
    raw_buys = [p for p in patterns if p.label == BUY]
    raw_sells = [p for p in patterns if p.label == SELL]
    hist_raw = cross_distance_histogram(raw_buys, raw_sells, bins=cfg.bins, population="raw")
    hist_filtered = cross_distance_histogram(
        library.buys, library.sells, bins=cfg.bins, population="filtered"
    )
    shift = histogram_shift_summary(hist_raw, hist_filtered)
    bars = read_bars_csv(bars_path, cfg.bar_interval, symbol=cfg.symbol)
    years = monthly_volatility(bars)
    write_histogram_csv(hist_raw, out / HIST_RAW)
    write_histogram_csv(hist_filtered, out / HIST_FILTERED)
    _write_json(shift, out / HIST_SHIFT)
    write_volatility_csv(years, out / VOLATILITY)
    write_svg(render_histogram(hist_raw, "cross-class L1 distances, all patterns"), out / HIST_RAW_SVG)
    write_svg(render_histogram(hist_filtered, "cross-class L1 distances, filtered library"), out / HIST_FILTERED_SVG)
    write_svg(render_box_plot(years, f"monthly std of {cfg.symbol} opens"), out / VOLATILITY_SVG)
    print(
        f"report: mean cross-class distance {shift['raw_mean']:.3f} -> "
        f"{shift['filtered_mean']:.3f}, median {shift['raw_median']:.3f} -> "
        f"{shift['filtered_median']:.3f}"
    )
    counts = {
        "raw_pairs": hist_raw.sample_count,
        "filtered_pairs": hist_filtered.sample_count,
        "years": len(years),
    }
    inputs = {
        "patterns": patterns_path,
        "library": library_path,
        "library_summary": summary_path,
        "bars": bars_path,
    }
    return counts, inputs


STAGES = {
    "ingest": stage_ingest,
    "extract": stage_extract,
    "score": stage_score,
    "filter": stage_filter,
    "baseline": stage_baseline,
    "backtest": stage_backtest,
    "report": stage_report,
}
PIPELINE = ("ingest", "extract", "score", "filter", "baseline", "backtest", "report")


def _run_stage(name: str, cfg: RunConfig, out: Path) -> dict:
    counts, inputs = STAGES[name](cfg, out)
    manifest = build_manifest(__version__, cfg.to_dict(), inputs, counts, cfg.seed)
    write_manifest(manifest, out / f"manifest_{name}.json")
    return counts


def cmd_all(cfg: RunConfig, out: Path) -> None:
    stage_counts = {name: _run_stage(name, cfg, out) for name in PIPELINE}
    outputs = {name: out / name for name in PIPELINE_OUTPUTS}
    manifest = build_manifest(__version__, cfg.to_dict(), outputs, stage_counts, cfg.seed)
    write_manifest(manifest, out / MANIFEST_ALL)
    print(f"all: wrote {len(PIPELINE_OUTPUTS)} artifacts to {out}")


def cmd_fixture(cfg: RunConfig, out: Path) -> None:
    """Write a planted-swing minute data set: a training and a test span."""
    train = make_planted_series(
        FIXTURE_TRAIN_BARS,
        default_ramp_plan(FIXTURE_TRAIN_BARS, FIXTURE_TRAIN_RAMPS, cfg.seed),
        seed=cfg.seed,
        interval=cfg.bar_interval,
        start=FIXTURE_TRAIN_START,
    )
    test = make_planted_series(
        FIXTURE_TEST_BARS,
        default_ramp_plan(FIXTURE_TEST_BARS, FIXTURE_TEST_RAMPS, cfg.seed + 1),
        seed=cfg.seed + 1,
        interval=cfg.bar_interval,
        start=FIXTURE_TEST_START,
    )
    train_text = expand_to_minutes(train.series)
    test_text = expand_to_minutes(test.series)
    with open(out / FIXTURE_TRAIN, "w") as fh:
        fh.write(train_text)
    with open(out / FIXTURE_TEST, "w") as fh:
        fh.write(test_text)
    counts = {
        "train_bars": len(train.series),
        "train_ramps": len(train.ramp_starts),
        "test_bars": len(test.series),
        "test_ramps": len(test.ramp_starts),
    }
    manifest = build_manifest(__version__, cfg.to_dict(), {}, counts, cfg.seed)
    write_manifest(manifest, out / "manifest_fixture.json")
    print(
        f"fixture: {out / FIXTURE_TRAIN} ({counts['train_bars']} bars, "
        f"{counts['train_ramps']} swings), {out / FIXTURE_TEST} "
        f"({counts['test_bars']} bars, {counts['test_ramps']} swings)"
    )


def cmd_replay(cfg: RunConfig, out: Path) -> None:
    """Re-run a finished pipeline from its manifest and compare the results."""
    manifest = read_manifest(_require(out / MANIFEST_ALL, "all"))
    conf = dict(manifest["config"])
    conf.pop("config_schema_version", None)
    conf["sweep_targets"] = tuple(conf["sweep_targets"])
    conf["sweep_stops"] = tuple(conf["sweep_stops"])
    replay_dir = out / "replay"
    replay_dir.mkdir(parents=True, exist_ok=True)
    replay_cfg = dataclasses.replace(RunConfig(**conf), out_dir=str(replay_dir))
    stage_counts = {name: _run_stage(name, replay_cfg, replay_dir) for name in PIPELINE}
    if stage_counts != manifest["stage_counts"]:
        raise PipelineInvariantError(
            f"replay stage counts diverged: {stage_counts} != {manifest['stage_counts']}"
        )
    changed = [
        name
        for name, entry in sorted(manifest["inputs"].items())
        if file_digest(replay_dir / name) != entry["sha256"]
    ]
    if changed:
        raise PipelineInvariantError(f"replay artifacts differ: {', '.join(changed)}")
    print(f"replay: {len(manifest['inputs'])} artifacts byte-identical, stage counts match")


# --- argument parsing ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_tuple(text: str) -> tuple:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One same-named override flag per config key, unset by default."""
    parser.add_argument("--config", metavar="FILE", default=None, help="key=value config file")
    hints = typing.get_type_hints(RunConfig)
    for field in dataclasses.fields(RunConfig):
        flag = f"--{field.name}"
        tp = hints[field.name]
        if tp is bool:
            parser.add_argument(
                flag, dest=field.name, action=argparse.BooleanOptionalAction,
                default=None, help=f"override {field.name}",
            )
        elif tp == tuple[float, ...]:
            parser.add_argument(
                flag, dest=field.name, type=_float_tuple, default=None,
                metavar="F,F,...", help=f"override {field.name}",
            )
        else:
            base = float if tp == float | None else tp
            parser.add_argument(
                flag, dest=field.name, type=base, default=None,
                metavar=base.__name__.upper(), help=f"override {field.name}",
            )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="entropy-patterns",
        description="Entropy-scored candlestick pattern mining, filtering and backtesting.",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"entropy-patterns {__version__} (config schema {CONFIG_SCHEMA_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "ingest": "parse minute CSV data and aggregate to trading bars",
        "extract": "slide windows over bars and label swing patterns",
        "score": "score patterns by local entropy and profit",
        "filter": "greedily build the distance-separated pattern library",
        "baseline": "run k-means, GMM and 2-D projection comparisons",
        "backtest": "replay a held-out span against the library",
        "report": "write distance histograms and volatility summaries",
        "all": "run every stage in order",
        "fixture": "write a synthetic minute data set with planted swings",
        "replay": "re-run a pipeline from its manifest and verify outputs",
    }
    for name in (*PIPELINE, "all", "fixture", "replay"):
        _add_config_flags(sub.add_parser(name, help=helps[name]))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        f.name: getattr(args, f.name, None) for f in dataclasses.fields(RunConfig)
    }
    try:
        cfg = apply_overrides(load_config(args.config), overrides)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "all":
            cmd_all(cfg, out)
        elif args.command == "fixture":
            cmd_fixture(cfg, out)
        elif args.command == "replay":
            cmd_replay(cfg, out)
        else:
            _run_stage(args.command, cfg, out)
    except PatternToolError as exc:
        doc = {
            "error": type(exc).__name__,
            "message": str(exc),
            "exit_code": exc.exit_code,
        }
        print(json.dumps(doc), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
