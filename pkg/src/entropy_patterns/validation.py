"""Input validation helpers used by the estimators and numeric routines."""

import numpy as np
from sklearn.exceptions import NotFittedError

from .errors import DimensionMismatchError

BUY = "Buy"
SELL = "Sell"


def as_feature_matrix(X, n_features: int | None = None) -> np.ndarray:
    """Coerce X to a 2-D float64 array with finite entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise DimensionMismatchError(
            f"expected {n_features} features per row, got {X.shape[1]}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    return X


def as_vector(x, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def as_labels(y, n: int) -> np.ndarray:
    """Coerce y to an array of 'Buy'/'Sell' strings of length n."""
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    out = np.array([str(v) for v in y], dtype=object)
    bad = [v for v in out if v not in (BUY, SELL)]
    if bad:
        raise ValueError(f"labels must be '{BUY}' or '{SELL}', got {bad[0]!r}")
    return out


def ensure_fitted(estimator, attribute: str) -> None:
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
