"""Entropy-scored candlestick pattern mining, filtering and backtesting.

The package turns minute-level OHLC price data into a library of Buy/Sell
window patterns: windows are labeled by which swing threshold the following
bars hit first, scored by local label entropy plus normalized profit, and
greedily filtered so that opposite-label patterns keep a minimum L1
distance. In-house k-means, Gaussian-mixture and 2-D projection baselines
plus a target/stop backtest round out the pipeline; the `entropy-patterns`
command drives it end to end.
"""

from .backtest import BacktestConfig, EquityCurve, TradeRecord, parameter_sweep, run_backtest
from .baselines import GaussianMixtureEM, KMeansLloyd, PCA2D, balance_ratio, gmm_em, kmeans, pca_project
from .entropy_core import ScoredPattern, ScoringConfig, local_entropy, score_all, shannon_entropy
from .market_data import BarSeries, OhlcBar, aggregate, parse_histdata_csv
from .pattern_engine import LabelingConfig, Pattern, extract_patterns, featurize
from .quality_filter import EntropyQualityFilter, FilterConfig, FilteredLibrary, default_theta, greedy_filter, verify
from .report import cross_distance_histogram, monthly_volatility
from .validation import BUY, SELL

__version__ = "0.1.0"

__all__ = [
    "BUY",
    "SELL",
    "BacktestConfig",
    "BarSeries",
    "EntropyQualityFilter",
    "EquityCurve",
    "FilterConfig",
    "FilteredLibrary",
    "GaussianMixtureEM",
    "KMeansLloyd",
    "LabelingConfig",
    "OhlcBar",
    "PCA2D",
    "Pattern",
    "ScoredPattern",
    "ScoringConfig",
    "TradeRecord",
    "aggregate",
    "balance_ratio",
    "cross_distance_histogram",
    "default_theta",
    "extract_patterns",
    "featurize",
    "gmm_em",
    "greedy_filter",
    "kmeans",
    "local_entropy",
    "monthly_volatility",
    "parameter_sweep",
    "parse_histdata_csv",
    "pca_project",
    "run_backtest",
    "score_all",
    "shannon_entropy",
    "verify",
    "__version__",
]
