"""MDAV microaggregation of rows into groups of k."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

from .exceptions import MCGenWarning, ValidationError


@dataclass(frozen=True)
class ClusterAssignment:
    cluster_ids: np.ndarray
    cluster_sizes: tuple[int, ...]
    k: int

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.cluster_ids == c)

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_sizes)

    def histogram(self) -> dict[int, int]:
        """Cluster size -> number of clusters with that size."""
        out: dict[int, int] = {}
        for s in self.cluster_sizes:
            out[s] = out.get(s, 0) + 1
        return dict(sorted(out.items()))


def parse_k(k):
    """Parse a cluster-size spec: an int, or a percentage string like ``"40%"``.

    Returns ``(value, is_percent)``.
    """
    if isinstance(k, str):
        text = k.strip()
        if text.endswith("%"):
            try:
                pct = float(text[:-1])
            except ValueError:
                raise ValidationError("k", f"cannot parse {k!r}") from None
            if not 0 < pct <= 100:
                raise ValidationError("k", f"percentage must be in (0, 100], got {k!r}")
            return pct, True
        try:
            k = int(text)
        except ValueError:
            raise ValidationError("k", f"cannot parse {k!r}") from None
    if isinstance(k, bool) or int(k) != k or int(k) < 1:
        raise ValidationError("k", f"k must be a positive integer or a percentage, got {k!r}")
    return int(k), False


def resolve_k(k, class_size: int) -> int:
    """Absolute cluster size for a class of ``class_size`` rows (at least 1)."""
    value, is_percent = parse_k(k)
    if not is_percent:
        return value
    return max(1, int(np.floor(value / 100.0 * class_size + 0.5)))


def project(X, feature_set) -> np.ndarray:
    """Columns ``feature_set`` of ``X`` (array or ScaledTable), rows in order."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    idx = list(feature_set)
    if not idx:
        raise ValidationError("project", "feature set is empty")
    if len(set(idx)) != len(idx):
        raise ValidationError("project", "feature indices must be distinct")
    if min(idx) < 0 or max(idx) >= X.shape[1]:
        raise ValidationError("project", f"feature index out of range for d={X.shape[1]}")
    return X[:, idx]


def _nearest(points, pool, anchor, count):
    """``count`` rows of ``pool`` closest to ``anchor`` (ties: lowest index)."""
    d2 = ((points[pool] - points[anchor]) ** 2).sum(axis=1)
    order = np.lexsort((pool, d2))
    return pool[order[:count]]


def _farthest(points, pool, target) -> int:
    d2 = ((points[pool] - target) ** 2).sum(axis=1)
    # pool is sorted ascending, so argmax picks the lowest index on ties
    return int(pool[int(np.argmax(d2))])


def mdav(points, k: int) -> ClusterAssignment:
    """Maximum-distance-to-average-vector microaggregation.

    While at least ``3k`` rows are unassigned, two groups are formed per
    round: around the row farthest from the centroid, then around the row
    farthest from that one. With ``2k..3k-1`` left, one more group is formed
    and the rest become the last group; fewer than ``2k`` rows become a single
    group. All clusters therefore have size ``k`` except one of size in
    ``[k, 2k-1]``. Distance ties resolve to the lowest row index.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    k = int(k)
    if k < 1:
        raise ValidationError("mdav", f"k must be >= 1, got {k}")
    if n == 0:
        raise ValidationError("mdav", "no rows to cluster")
    if k == 1:
        warnings.warn("k=1 gives single-row clusters with zero covariance", MCGenWarning)
    if n < k:
        warnings.warn(f"only {n} rows for k={k}; using one cluster", MCGenWarning)

    ids = np.full(n, -1, dtype=int)
    remaining = np.arange(n)
    next_id = 0

    def take(group):
        nonlocal remaining, next_id
        ids[group] = next_id
        next_id += 1
        remaining = remaining[ids[remaining] < 0]

    while len(remaining) >= 3 * k:
        centroid = points[remaining].mean(axis=0)
        r = _farthest(points, remaining, centroid)
        take(_nearest(points, remaining, r, k))
        s = _farthest(points, remaining, points[r])
        take(_nearest(points, remaining, s, k))
    if len(remaining) >= 2 * k:
        centroid = points[remaining].mean(axis=0)
        r = _farthest(points, remaining, centroid)
        take(_nearest(points, remaining, r, k))
    if len(remaining):
        take(remaining)

    sizes = tuple(int(c) for c in np.bincount(ids, minlength=next_id))
    return ClusterAssignment(ids, sizes, k)


class MDAV(ClusterMixin, BaseEstimator):
    """Microaggregation clusterer; ``labels_`` holds the group of each row."""

    def __init__(self, k=3):
        self.k = k

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        self.assignment_ = mdav(X, self.k)
        self.labels_ = self.assignment_.cluster_ids
        self.cluster_sizes_ = self.assignment_.cluster_sizes
        return self
