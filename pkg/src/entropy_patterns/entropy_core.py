"""Entropy, information gain and combined pattern scoring.

All entropies are in nats (natural log). A pattern's local entropy is the
label entropy of its k nearest neighbors under the L1 metric; information
gain is the drop from the global label entropy to that local value. The
combined score blends information gain with min-max-normalized PnL:

    score = alpha * info_gain + (1 - alpha) * pnl_norm
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    KTooLargeError,
    MalformedLineError,
    NotADistributionError,
)
from .pattern_engine import Pattern, feature_matrix, labels_of
from .validation import BUY

DISTRIBUTION_TOL = 1e-9


@dataclass
class ScoringConfig:
    k: int = 25
    alpha: float = 0.8
    standardize: bool = False  # z-score features for the neighbor search only
    normalize_ig: bool = False  # divide info_gain by h_global before blending

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass
class ScoredPattern:
    pattern: Pattern
    h_local: float
    info_gain: float
    pnl_norm: float
    score: float

    @property
    def id(self) -> int:
        return self.pattern.id

    @property
    def label(self) -> str:
        return self.pattern.label

    @property
    def features(self) -> np.ndarray:
        return self.pattern.features


def shannon_entropy(probabilities) -> float:
    """-sum p ln p over a probability vector, with 0 ln 0 = 0."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    total = float(p.sum()) if p.size else 0.0
    if p.size == 0 or (p < 0).any() or abs(total - 1.0) > DISTRIBUTION_TOL:
        raise NotADistributionError(
            "probabilities must be nonnegative and sum to 1", total
        )
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def l1_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def pairwise_l1(X, Y=None, block: int = 256) -> np.ndarray:
    """Dense L1 distance matrix, row-blocked to bound peak memory."""
    X = np.asarray(X, dtype=np.float64)
    Y = X if Y is None else np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise DimensionMismatchError(f"need 2-D inputs with equal width: {X.shape} vs {Y.shape}")
    out = np.empty((len(X), len(Y)), dtype=np.float64)
    for start in range(0, len(X), block):
        stop = min(start + block, len(X))
        out[start:stop] = np.abs(X[start:stop, None, :] - Y[None, :, :]).sum(axis=2)
    return out


def knn_indices(X, k: int, ids=None) -> np.ndarray:
    """Row i -> indices of the k nearest other rows by L1.

    Ties at equal distance are broken by lower id (deterministic regardless
    of input storage order).
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if k >= n:
        raise KTooLargeError(f"k={k} needs at least k+1 points, got {n}")
    ids = np.arange(n) if ids is None else np.asarray(ids)
    D = pairwise_l1(X)
    np.fill_diagonal(D, np.inf)
    order = np.lexsort((np.broadcast_to(ids, D.shape), D), axis=-1)
    return order[:, :k]


def local_entropy(x: Pattern, patterns, k: int) -> float:
    """Label entropy of the k nearest neighbors of `x` within `patterns`."""
    idx = next(
        (i for i, p in enumerate(patterns) if p is x or p.id == x.id), None
    )
    if idx is None:
        raise EmptyInputError(f"pattern id {x.id} not found in the collection")
    X = feature_matrix(patterns)
    ids = np.array([p.id for p in patterns])
    neigh = knn_indices(X, k, ids)[idx]
    buys = sum(1 for j in neigh if patterns[j].label == BUY)
    return shannon_entropy([buys / k, (k - buys) / k])


def label_entropy(labels) -> float:
    labels = np.asarray(labels, dtype=object)
    if labels.size == 0:
        raise EmptyInputError("no labels")
    share = float((labels == BUY).sum()) / labels.size
    return shannon_entropy([share, 1.0 - share])


def _standardized(X: np.ndarray) -> np.ndarray:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


def score_all(patterns, cfg: ScoringConfig = None) -> list:
    """Score every pattern and return them in descending-score order.

    Sort ties break by lower local entropy, then lower id, so the output
    order is total and reproducible. Single-label inputs are allowed (the
    filter degenerates gracefully) but yield h_global = 0 and a warning.
    """
    cfg = cfg or ScoringConfig()
    patterns = list(patterns)
    if not patterns:
        raise EmptyInputError("no patterns to score")
    labels = labels_of(patterns)
    if len(set(labels)) < 2:
        warnings.warn(
            "all patterns share one label; information gain will be <= 0",
            stacklevel=2,
        )
    h_global = label_entropy(labels)

    X = feature_matrix(patterns)
    ids = np.array([p.id for p in patterns])
    neigh = knn_indices(_standardized(X) if cfg.standardize else X, cfg.k, ids)
    buy_counts = (labels[neigh] == BUY).sum(axis=1)
    # one entropy per possible neighbor count, via the same scalar routine
    ent = np.array(
        [shannon_entropy([c / cfg.k, (cfg.k - c) / cfg.k]) for c in range(cfg.k + 1)]
    )
    h_local = ent[buy_counts]

    pnl = np.array([p.pnl_raw for p in patterns], dtype=np.float64)
    spread = pnl.max() - pnl.min()
    if spread == 0:
        pnl_norm = np.ones_like(pnl)
    else:
        pnl_norm = (pnl - pnl.min()) / spread

    info_gain = h_global - h_local
    if cfg.normalize_ig and h_global > 0:
        info_gain = info_gain / h_global
    score = cfg.alpha * info_gain + (1.0 - cfg.alpha) * pnl_norm

    scored = [
        ScoredPattern(p, float(h_local[i]), float(info_gain[i]), float(pnl_norm[i]), float(score[i]))
        for i, p in enumerate(patterns)
    ]
    scored.sort(key=lambda sp: (-sp.score, sp.h_local, sp.pattern.id))
    return scored


SCORED_HEADER_TAIL = "h_local,info_gain,pnl_norm,score"


def write_scored_csv(scored, path, n_features: int = None) -> None:
    scored = list(scored)
    if n_features is None:
        n_features = len(scored[0].pattern.features) if scored else 32
    header = (
        "id,origin_iso8601,label,pnl_raw,"
        + ",".join(f"f{i}" for i in range(n_features))
        + ","
        + SCORED_HEADER_TAIL
    )
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for sp in scored:
            p = sp.pattern
            origin = np.datetime_as_string(np.datetime64(p.origin, "s"), unit="s")
            feats = ",".join(repr(v) for v in np.asarray(p.features).tolist())
            fh.write(
                f"{p.id},{origin},{p.label},{float(p.pnl_raw)!r},{feats},"
                f"{sp.h_local!r},{sp.info_gain!r},{sp.pnl_norm!r},{sp.score!r}\n"
            )


def read_scored_csv(path) -> list:
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.endswith(SCORED_HEADER_TAIL):
            raise MalformedLineError(1, header, "unexpected scored CSV header")
        n_features = len(header.split(",")) - 8
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 8 + n_features:
                raise MalformedLineError(
                    lineno, line, f"expected {8 + n_features} fields, got {len(parts)}"
                )
            try:
                pattern = Pattern(
                    id=int(parts[0]),
                    origin=np.datetime64(parts[1], "s"),
                    features=np.array([float(x) for x in parts[4 : 4 + n_features]]),
                    label=parts[2],
                    pnl_raw=float(parts[3]),
                )
                tail = [float(x) for x in parts[4 + n_features :]]
            except ValueError as exc:
                raise MalformedLineError(lineno, line, str(exc)) from None
            out.append(ScoredPattern(pattern, *tail))
    return out
