"""In-house clustering and projection baselines.

The point of these is comparison, not novelty: K-means and a full-covariance
Gaussian mixture cluster the same pattern features the entropy filter sees,
and a 2-component PCA projects them for inspection. Everything is
implemented directly on numpy primitives (plus `np.linalg.eigh`/`cholesky`
for the dense linear algebra) so the iteration-level guarantees the tests
assert (monotone objective, monotone log-likelihood) are properties of this
code, not of an imported black box.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import SingularCovarianceError, TooFewPointsError
from .validation import BUY, SELL, as_feature_matrix, ensure_fitted

RIDGE = 1e-6


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    centers: np.ndarray
    iterations: int
    converged: bool
    objective_trace: list = None  # k-means: SSE per assignment step
    loglik_trace: list = None  # gmm: total log-likelihood per E step

    def counts(self, k: int = None) -> np.ndarray:
        k = k if k is not None else int(self.labels.max()) + 1
        return np.bincount(self.labels, minlength=k)


@dataclass
class Projection2D:
    coordinates: np.ndarray  # (n, 2)
    explained_variance: tuple  # two fractions, first >= second
    components: np.ndarray  # (2, d) orthonormal rows


def _sq_dists(X, centers):
    # (n, k) squared Euclidean distances
    return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp_init(X, k, rng):
    n = len(X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)  # all points identical: any choice works
        else:
            idx = rng.choice(n, p=closest / total)
        centers[j] = X[idx]
        closest = np.minimum(closest, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


class KMeansLloyd(BaseEstimator):
    """Lloyd's iterations from a k-means++ start, deterministic per seed.

    Stops when the assignment is unchanged or after `max_iter` rounds.
    An empty cluster is re-seeded from the point farthest from its center,
    which keeps the objective trace non-increasing.
    """

    def __init__(self, n_clusters=2, seed=0, max_iter=300):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = as_feature_matrix(X)
        k = self.n_clusters
        if len(X) < k:
            raise TooFewPointsError(f"{len(X)} points cannot form {k} clusters")
        rng = np.random.default_rng(self.seed)
        centers = _kmeanspp_init(X, k, rng)

        labels = np.full(len(X), -1)
        trace = []
        converged = False
        it = 0
        for it in range(1, self.max_iter + 1):
            dist = _sq_dists(X, centers)
            new_labels = dist.argmin(axis=1)
            trace.append(float(dist[np.arange(len(X)), new_labels].sum()))
            if np.array_equal(new_labels, labels):
                converged = True
                break
            labels = new_labels
            for j in range(k):
                mask = labels == j
                if mask.any():
                    centers[j] = X[mask].mean(axis=0)
                else:
                    worst = int(dist[np.arange(len(X)), labels].argmax())
                    centers[j] = X[worst]

        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = trace[-1]
        self.objective_trace_ = trace
        self.n_iter_ = it
        self.converged_ = converged
        return self

    def predict(self, X):
        ensure_fitted(self, "cluster_centers_")
        X = as_feature_matrix(X, self.cluster_centers_.shape[1])
        return _sq_dists(X, self.cluster_centers_).argmin(axis=1)

    def assignment(self) -> ClusterAssignment:
        ensure_fitted(self, "cluster_centers_")
        return ClusterAssignment(
            self.labels_, self.cluster_centers_, self.n_iter_,
            self.converged_, objective_trace=self.objective_trace_,
        )


def kmeans(X, k: int = 2, seed: int = 0) -> ClusterAssignment:
    return KMeansLloyd(n_clusters=k, seed=seed).fit(X).assignment()


def _logsumexp(a, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else float(out)


class GaussianMixtureEM(BaseEstimator):
    """Two-component (by default) full-covariance mixture fit by EM.

    Covariances carry a ridge on the diagonal; initialization comes from a
    K-means run with the same seed so the whole fit is deterministic. The
    log-likelihood recorded at each E step is non-decreasing, the classic
    EM guarantee, and the tests hold this to 1e-9 slack.
    """

    def __init__(self, n_components=2, seed=0, max_iter=200, tol=1e-6, ridge=RIDGE):
        self.n_components = n_components
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.ridge = ridge

    def _log_gaussians(self, X, means, covs):
        n, d = X.shape
        out = np.empty((n, self.n_components))
        for j in range(self.n_components):
            try:
                L = np.linalg.cholesky(covs[j])
            except np.linalg.LinAlgError:
                raise SingularCovarianceError(j) from None
            diff = X - means[j]
            # solve L z = diff^T; quad form = |z|^2, logdet = 2 sum log diag L
            z = np.linalg.solve(L, diff.T)
            quad = (z**2).sum(axis=0)
            logdet = 2.0 * np.log(np.diag(L)).sum()
            out[:, j] = -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)
        return out

    def fit(self, X, y=None):
        X = as_feature_matrix(X)
        n, d = X.shape
        m = self.n_components
        if n < 2 * m:
            raise TooFewPointsError(f"need at least {2 * m} points, got {n}")

        km = KMeansLloyd(n_clusters=m, seed=self.seed).fit(X)
        means = km.cluster_centers_.copy()
        covs = np.empty((m, d, d))
        weights = np.empty(m)
        for j in range(m):
            mask = km.labels_ == j
            weights[j] = max(mask.sum(), 1) / n
            pts = X[mask] if mask.sum() >= 2 else X
            diff = pts - pts.mean(axis=0)
            covs[j] = diff.T @ diff / len(pts) + self.ridge * np.eye(d)
        weights = weights / weights.sum()

        trace = []
        converged = False
        resp = None
        it = 0
        for it in range(1, self.max_iter + 1):
            joint = self._log_gaussians(X, means, covs) + np.log(weights)[None, :]
            norm = _logsumexp(joint, axis=1)
            trace.append(float(norm.sum()))
            resp = np.exp(joint - norm[:, None])
            if len(trace) > 1 and trace[-1] - trace[-2] < self.tol:
                converged = True
                break
            nj = np.maximum(resp.sum(axis=0), 1e-12)
            weights = nj / n
            means = (resp.T @ X) / nj[:, None]
            for j in range(m):
                diff = X - means[j]
                covs[j] = (resp[:, j, None] * diff).T @ diff / nj[j] + self.ridge * np.eye(d)

        self.weights_ = weights
        self.means_ = means
        self.covariances_ = covs
        self.labels_ = resp.argmax(axis=1)
        self.loglik_trace_ = trace
        self.n_iter_ = it
        self.converged_ = converged
        return self

    def predict(self, X):
        ensure_fitted(self, "means_")
        X = as_feature_matrix(X, self.means_.shape[1])
        joint = self._log_gaussians(X, self.means_, self.covariances_) + np.log(
            self.weights_
        )[None, :]
        return joint.argmax(axis=1)

    def assignment(self) -> ClusterAssignment:
        ensure_fitted(self, "means_")
        return ClusterAssignment(
            self.labels_, self.means_, self.n_iter_, self.converged_,
            loglik_trace=self.loglik_trace_,
        )


def gmm_em(X, components: int = 2, seed: int = 0) -> ClusterAssignment:
    return GaussianMixtureEM(n_components=components, seed=seed).fit(X).assignment()


class PCA2D(BaseEstimator):
    """Top-2 principal directions via eigendecomposition of the covariance.

    The feature dimension is small and fixed (32), so the d x d covariance
    route is exact and cheap. Components are sign-fixed so their
    largest-magnitude entry is positive.
    """

    def __init__(self):
        pass

    def fit(self, X, y=None):
        X = as_feature_matrix(X)
        n = len(X)
        if n < 3:
            raise TooFewPointsError(f"need at least 3 points, got {n}")
        self.mean_ = X.mean(axis=0)
        Xc = X - self.mean_
        cov = Xc.T @ Xc / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        eigvals = np.maximum(eigvals[order], 0.0)
        vecs = eigvecs[:, order[:2]].T
        for row in vecs:
            if row[np.argmax(np.abs(row))] < 0:
                row *= -1.0
        # rank check on true singular values; covariance eigenvalues square
        # the ratio and would push the threshold below float noise
        sing = np.linalg.svd(Xc, compute_uv=False)
        if sing[1] < 1e-12 * max(sing[0], 1e-300):
            warnings.warn("data is effectively rank 1; second component is arbitrary",
                          stacklevel=2)
        total = eigvals.sum()
        self.components_ = vecs
        self.explained_variance_ratio_ = (
            (float(eigvals[0] / total), float(eigvals[1] / total)) if total > 0 else (0.0, 0.0)
        )
        return self

    def transform(self, X):
        ensure_fitted(self, "components_")
        X = as_feature_matrix(X, self.components_.shape[1])
        return (X - self.mean_) @ self.components_.T

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)

    def reconstruct(self, X):
        """Best rank-2 approximation of X in the original feature space."""
        return self.transform(X) @ self.components_ + self.mean_


def pca_project(X) -> Projection2D:
    est = PCA2D()
    coords = est.fit_transform(X)
    return Projection2D(coords, est.explained_variance_ratio_, est.components_)


@dataclass
class MethodBalance:
    method: str
    buy_count: int
    sell_count: int

    @property
    def ratio(self) -> float:
        return balance_ratio(self.buy_count, self.sell_count)


def balance_ratio(a: int, b: int) -> float:
    """min/max of two set sizes; 1.0 is perfectly balanced, 0.0 degenerate."""
    if max(a, b) == 0:
        return 0.0
    return min(a, b) / max(a, b)


def map_clusters_to_labels(cluster_labels, true_labels) -> dict:
    """Assign {Buy, Sell} to the two clusters, majority vote per cluster.

    When both clusters vote the same way the permutation maximizing total
    agreement with the true labels is used instead, so the mapping is
    always one-to-one and deterministic.
    """
    cluster_labels = np.asarray(cluster_labels)
    true_labels = np.asarray(true_labels, dtype=object)
    in0 = cluster_labels == 0
    buy0 = (true_labels[in0] == BUY).sum()
    sell0 = in0.sum() - buy0
    buy1 = (true_labels[~in0] == BUY).sum()
    sell1 = (~in0).sum() - buy1
    # agreement under (0->Buy, 1->Sell) vs the swap
    straight = buy0 + sell1
    swapped = sell0 + buy1
    if straight >= swapped:
        return {0: BUY, 1: SELL}
    return {0: SELL, 1: BUY}


def balance_report(
    entropy_buy: int, entropy_sell: int, km: ClusterAssignment,
    gm: ClusterAssignment, true_labels,
) -> list:
    """One MethodBalance row per method, baseline clusters mapped to labels."""
    rows = [MethodBalance("entropy_filter", entropy_buy, entropy_sell)]
    for name, asg in (("kmeans", km), ("gmm", gm)):
        mapping = map_clusters_to_labels(asg.labels, true_labels)
        counts = asg.counts(2)
        by_label = {mapping[0]: int(counts[0]), mapping[1]: int(counts[1])}
        rows.append(MethodBalance(name, by_label[BUY], by_label[SELL]))
    return rows


def write_projection_csv(ids, labels, projection: Projection2D, path) -> None:
    with open(path, "w") as fh:
        fh.write("id,label,pc1,pc2\n")
        coords = projection.coordinates
        for i in range(len(ids)):
            fh.write(
                f"{ids[i]},{labels[i]},{float(coords[i, 0])!r},{float(coords[i, 1])!r}\n"
            )


def write_balance_json(rows, path) -> None:
    doc = {
        "methods": [
            {
                "method": r.method,
                "buy_count": r.buy_count,
                "sell_count": r.sell_count,
                "balance_ratio": r.ratio,
            }
            for r in rows
        ]
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def format_balance_table(rows) -> str:
    lines = [f"{'method':<16}{'buy':>8}{'sell':>8}{'ratio':>10}"]
    for r in rows:
        lines.append(f"{r.method:<16}{r.buy_count:>8}{r.sell_count:>8}{r.ratio:>10.3f}")
    return "\n".join(lines) + "\n"
