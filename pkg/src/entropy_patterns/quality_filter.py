"""Greedy conflict filtering of scored patterns.

Patterns are visited in descending score order. A Buy is admitted only if
its L1 distance to every already-admitted Sell is at least theta, and
symmetrically for Sells against admitted Buys. Same-label proximity never
blocks admission, and a rejected pattern imposes no constraint on later
candidates. The result is a pair of sets whose cross-class separation is
at least theta for every Buy/Sell pair, which `verify` checks exhaustively.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .entropy_core import (
    ScoredPattern,
    ScoringConfig,
    pairwise_l1,
    score_all,
)
from .errors import EmptyInputError, MalformedLineError, UnsortedInputError
from .pattern_engine import Pattern
from .validation import BUY, SELL, as_feature_matrix, ensure_fitted

SUMMARY_SCHEMA_VERSION = 1
THETA_PERCENTILE = 5.0


@dataclass
class FilterConfig:
    theta: float
    scoring: ScoringConfig = field(default_factory=ScoringConfig)

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")


@dataclass
class FilterProvenance:
    buy_before: int
    sell_before: int
    buy_after: int
    sell_after: int
    blocked_by: dict  # rejected id -> id of the first admitted blocker


@dataclass
class FilteredLibrary:
    buys: list
    sells: list
    config: FilterConfig
    provenance: FilterProvenance
    scored: list  # full score-ordered input, admitted and rejected alike

    @property
    def admitted(self) -> list:
        admitted_ids = {sp.pattern.id for sp in self.buys} | {
            sp.pattern.id for sp in self.sells
        }
        return [sp for sp in self.scored if sp.pattern.id in admitted_ids]


@dataclass
class VerificationReport:
    passed: bool
    min_cross_distance: float
    theta: float
    pairs_checked: int
    worst_pair: tuple = None  # (buy id, sell id) achieving the minimum


def _check_sorted(scored) -> None:
    for prev, cur in zip(scored, scored[1:]):
        a = (-prev.score, prev.h_local, prev.pattern.id)
        b = (-cur.score, cur.h_local, cur.pattern.id)
        if a > b:
            raise UnsortedInputError(
                f"patterns {prev.pattern.id} and {cur.pattern.id} violate the "
                "descending score order"
            )


def greedy_filter(scored, cfg: FilterConfig) -> FilteredLibrary:
    """One pass over score-sorted patterns, keeping the cross-class margin.

    The input sort is verified, not trusted. Rejections record the first
    admitted opposite-label pattern closer than theta.
    """
    scored = list(scored)
    if not scored:
        raise EmptyInputError("nothing to filter")
    _check_sorted(scored)

    width = len(scored[0].pattern.features)
    sides = {BUY: [], SELL: []}
    # admitted opposite-label features, grown in admission order
    feats = {BUY: np.empty((0, width)), SELL: np.empty((0, width))}
    blocked_by = {}
    for sp in scored:
        other = SELL if sp.label == BUY else BUY
        wall = feats[other]
        if len(wall):
            dist = np.abs(wall - sp.features[None, :]).sum(axis=1)
            close = np.flatnonzero(dist < cfg.theta)
            if close.size:
                blocked_by[sp.pattern.id] = sides[other][close[0]].pattern.id
                continue
        sides[sp.label].append(sp)
        feats[sp.label] = np.vstack([feats[sp.label], sp.features[None, :]])

    n_buy = sum(1 for sp in scored if sp.label == BUY)
    return FilteredLibrary(
        buys=sides[BUY],
        sells=sides[SELL],
        config=cfg,
        provenance=FilterProvenance(
            buy_before=n_buy,
            sell_before=len(scored) - n_buy,
            buy_after=len(sides[BUY]),
            sell_after=len(sides[SELL]),
            blocked_by=blocked_by,
        ),
        scored=scored,
    )


def verify(library: FilteredLibrary) -> VerificationReport:
    """Exhaustive check of the cross-class margin over all admitted pairs."""
    buys, sells = library.buys, library.sells
    theta = library.config.theta
    if not buys or not sells:
        return VerificationReport(True, float("inf"), theta, 0)
    D = pairwise_l1(
        np.array([sp.features for sp in buys]),
        np.array([sp.features for sp in sells]),
    )
    flat = int(np.argmin(D))
    i, j = divmod(flat, D.shape[1])
    dmin = float(D[i, j])
    return VerificationReport(
        passed=dmin >= theta,
        min_cross_distance=dmin,
        theta=theta,
        pairs_checked=D.size,
        worst_pair=(buys[i].pattern.id, sells[j].pattern.id),
    )


def default_theta(scored, percentile: float = THETA_PERCENTILE) -> float:
    """Data-driven threshold: a low percentile of raw cross-class distances."""
    Xb = np.array([sp.features for sp in scored if sp.label == BUY])
    Xs = np.array([sp.features for sp in scored if sp.label == SELL])
    if len(Xb) == 0 or len(Xs) == 0:
        warnings.warn(
            "one label side is empty; falling back to theta=1.0", stacklevel=2
        )
        return 1.0
    cross = pairwise_l1(Xb, Xs).ravel()
    return float(np.percentile(cross, percentile))


class EntropyQualityFilter(BaseEstimator):
    """Estimator wrapper: score, threshold and filter in one `fit`.

    Accepts either a sequence of Pattern records, or a feature matrix plus
    a label vector (`y`) and optional per-row PnL. After fitting, `predict`
    labels new feature rows by their nearest admitted pattern (1-NN, L1).
    """

    def __init__(self, theta=None, k=25, alpha=0.8, standardize=False, normalize_ig=False):
        self.theta = theta
        self.k = k
        self.alpha = alpha
        self.standardize = standardize
        self.normalize_ig = normalize_ig

    def _as_patterns(self, X, y, pnl):
        if len(X) and isinstance(X[0], Pattern):
            return list(X)
        M = as_feature_matrix(X)
        if y is None:
            raise ValueError("y labels are required when X is a feature matrix")
        if pnl is None:
            pnl = np.zeros(len(M))
        epoch = np.datetime64("1970-01-01T00:00:00", "s")
        return [
            Pattern(i, epoch + np.timedelta64(i, "m"), M[i], str(y[i]), float(pnl[i]))
            for i in range(len(M))
        ]

    def fit(self, X, y=None, pnl=None):
        patterns = self._as_patterns(X, y, pnl)
        scoring = ScoringConfig(
            k=self.k,
            alpha=self.alpha,
            standardize=self.standardize,
            normalize_ig=self.normalize_ig,
        )
        self.scored_ = score_all(patterns, scoring)
        self.theta_ = self.theta if self.theta is not None else default_theta(self.scored_)
        self.library_ = greedy_filter(self.scored_, FilterConfig(self.theta_, scoring))
        return self

    def predict(self, X):
        ensure_fitted(self, "library_")
        M = as_feature_matrix(X)
        admitted = self.library_.buys + self.library_.sells
        if not admitted:
            raise EmptyInputError("no admitted patterns to match against")
        F = np.array([sp.features for sp in admitted])
        ids = np.array([sp.pattern.id for sp in admitted])
        D = pairwise_l1(M, F)
        # nearest admitted pattern, ties to the lower id
        order = np.lexsort((np.broadcast_to(ids, D.shape), D), axis=-1)
        nearest = order[:, 0]
        return np.array([admitted[j].label for j in nearest], dtype=object)


def write_library_csv(library: FilteredLibrary, path) -> None:
    """Scored rows in score order plus admitted flag and first blocker id."""
    scored = library.scored
    n_features = len(scored[0].pattern.features) if scored else 32
    header = (
        "id,origin_iso8601,label,pnl_raw,"
        + ",".join(f"f{i}" for i in range(n_features))
        + ",h_local,info_gain,pnl_norm,score,admitted,blocked_by"
    )
    blocked = library.provenance.blocked_by
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for sp in scored:
            p = sp.pattern
            origin = np.datetime_as_string(np.datetime64(p.origin, "s"), unit="s")
            feats = ",".join(repr(v) for v in np.asarray(p.features).tolist())
            admitted = 0 if p.id in blocked else 1
            tail = "" if admitted else str(blocked[p.id])
            fh.write(
                f"{p.id},{origin},{p.label},{float(p.pnl_raw)!r},{feats},"
                f"{sp.h_local!r},{sp.info_gain!r},{sp.pnl_norm!r},{sp.score!r},"
                f"{admitted},{tail}\n"
            )


def read_library_csv(path, theta: float, scoring: ScoringConfig = None) -> FilteredLibrary:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.endswith("score,admitted,blocked_by"):
            raise MalformedLineError(1, header, "unexpected library CSV header")
        n_features = len(header.split(",")) - 10
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 10 + n_features:
                raise MalformedLineError(
                    lineno, line, f"expected {10 + n_features} fields, got {len(parts)}"
                )
            try:
                pattern = Pattern(
                    id=int(parts[0]),
                    origin=np.datetime64(parts[1], "s"),
                    features=np.array([float(x) for x in parts[4 : 4 + n_features]]),
                    label=parts[2],
                    pnl_raw=float(parts[3]),
                )
                h_local, info_gain, pnl_norm, score = (
                    float(x) for x in parts[4 + n_features : 8 + n_features]
                )
                admitted = int(parts[8 + n_features])
                blocker = parts[9 + n_features]
            except ValueError as exc:
                raise MalformedLineError(lineno, line, str(exc)) from None
            rows.append(
                (ScoredPattern(pattern, h_local, info_gain, pnl_norm, score), admitted, blocker)
            )
    scored = [sp for sp, _, _ in rows]
    blocked_by = {sp.pattern.id: int(b) for sp, adm, b in rows if not adm}
    buys = [sp for sp, adm, _ in rows if adm and sp.label == BUY]
    sells = [sp for sp, adm, _ in rows if adm and sp.label == SELL]
    n_buy = sum(1 for sp in scored if sp.label == BUY)
    return FilteredLibrary(
        buys=buys,
        sells=sells,
        config=FilterConfig(theta, scoring or ScoringConfig()),
        provenance=FilterProvenance(
            n_buy, len(scored) - n_buy, len(buys), len(sells), blocked_by
        ),
        scored=scored,
    )


def write_summary_json(library: FilteredLibrary, report: VerificationReport, path) -> None:
    prov = library.provenance
    # None stands in for the +inf sentinel (one side empty): strict JSON has no inf
    dmin = report.min_cross_distance
    doc = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "theta": library.config.theta,
        "alpha": library.config.scoring.alpha,
        "k": library.config.scoring.k,
        "standardize": library.config.scoring.standardize,
        "normalize_ig": library.config.scoring.normalize_ig,
        "buy_before": prov.buy_before,
        "sell_before": prov.sell_before,
        "buy_after": prov.buy_after,
        "sell_after": prov.sell_after,
        "rejected": len(prov.blocked_by),
        "min_cross_distance": dmin if np.isfinite(dmin) else None,
        "separation_verified": report.passed,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_summary_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def load_scored_library(csv_path, summary_path) -> FilteredLibrary:
    summary = read_summary_json(summary_path)
    scoring = ScoringConfig(
        k=summary["k"],
        alpha=summary["alpha"],
        standardize=summary.get("standardize", False),
        normalize_ig=summary.get("normalize_ig", False),
    )
    return read_library_csv(csv_path, summary["theta"], scoring)
