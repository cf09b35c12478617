"""Feature-level clustering into independent feature sets.

Features are grouped bottom-up (average linkage) over the correlation distance
``2 n (1 - corr)``; the number of sets is picked by the Davies-Bouldin index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import MCGenWarning, ValidationError


@dataclass(frozen=True)
class FeaturePartition:
    sets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        sets = tuple(tuple(sorted(int(i) for i in s)) for s in self.sets)
        if not sets or any(len(s) == 0 for s in sets):
            raise ValidationError("FeaturePartition", "every feature set must be non-empty")
        flat = [i for s in sets for i in s]
        if sorted(flat) != list(range(len(flat))):
            raise ValidationError("FeaturePartition", "sets must be disjoint and cover 0..d-1")
        object.__setattr__(self, "sets", sets)

    @property
    def m(self) -> int:
        return len(self.sets)

    @property
    def d(self) -> int:
        return sum(len(s) for s in self.sets)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.sets)

    def labels(self) -> np.ndarray:
        out = np.empty(self.d, dtype=int)
        for k, s in enumerate(self.sets):
            out[list(s)] = k
        return out

    @classmethod
    def from_labels(cls, labels) -> "FeaturePartition":
        """Build from per-feature labels; sets ordered by smallest member."""
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(tuple(sorted((tuple(g) for g in groups.values()), key=min)))

    def canonical(self) -> frozenset:
        return frozenset(frozenset(s) for s in self.sets)


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray
    n: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError("DistanceMatrix", "distance grid must be square")
        if not np.array_equal(v, v.T):
            raise ValidationError("DistanceMatrix", "distance grid must be symmetric")
        if np.any(np.diag(v) != 0) or np.any(v < 0):
            raise ValidationError("DistanceMatrix", "need zero diagonal and non-negative entries")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[0]


def pearson_corr_matrix(X) -> np.ndarray:
    """Pearson correlation between columns of ``X`` (or a ScaledTable).

    Zero-variance columns get correlation 0 with every other column.
    """
    X = getattr(X, "values", X)
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValidationError("pearson_corr_matrix", f"correlation undefined for n={n} rows")
    if d < 2:
        raise ValidationError("pearson_corr_matrix", f"need at least 2 features, got {d}")
    centered = X - X.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    flat = ss <= 0.0
    if flat.any():
        warnings.warn(f"zero-variance features {np.flatnonzero(flat).tolist()} get correlation 0", MCGenWarning)
    norm = np.sqrt(np.where(flat, 1.0, ss))
    z = centered / norm
    corr = np.clip(z.T @ z, -1.0, 1.0)
    # duplicated (or negated) columns should sit at distance exactly 0 (or 4n)
    near = np.abs(np.abs(corr) - 1.0) <= 16 * np.finfo(float).eps
    corr[near] = np.sign(corr[near])
    corr[flat, :] = 0.0
    corr[:, flat] = 0.0
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    return corr


def corr_to_distance(corr, n: int, use_abs: bool = False) -> DistanceMatrix:
    """Entry-wise ``2 n (1 - corr)``; ``use_abs`` substitutes ``|corr|``."""
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValidationError("corr_to_distance", "correlation grid must be square")
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise ValidationError("corr_to_distance", "correlations must lie in [-1, 1]")
    c = np.clip(np.abs(corr) if use_abs else corr, -1.0, 1.0)
    dist = 2.0 * n * (1.0 - c)
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    return DistanceMatrix(dist, n)


def merge_sequence(dist: DistanceMatrix) -> list[tuple[int, int]]:
    """Full average-linkage merge order as pairs of cluster ids.

    A cluster's id is its smallest feature index. Equal linkage distances are
    resolved toward the lexicographically smallest ``(min id, max id)`` pair.
    """
    D = np.asarray(dist.values, dtype=float)
    clusters = {i: [i] for i in range(dist.d)}
    merges = []
    while len(clusters) > 1:
        ids = sorted(clusters)
        best = None
        for a_pos, a in enumerate(ids):
            for b in ids[a_pos + 1:]:
                link = D[np.ix_(clusters[a], clusters[b])].mean()
                if best is None or link < best[0]:
                    best = (link, a, b)
        _, a, b = best
        clusters[a] = sorted(clusters[a] + clusters.pop(b))
        merges.append((a, b))
    return merges


def _cut(d: int, merges, m: int) -> FeaturePartition:
    clusters = {i: [i] for i in range(d)}
    for a, b in merges[: d - m]:
        clusters[a] = clusters[a] + clusters.pop(b)
    return FeaturePartition(tuple(tuple(c) for _, c in sorted(clusters.items())))


def agglomerative_cluster(dist: DistanceMatrix, m: int) -> FeaturePartition:
    """Merge the ``d`` singleton features until ``m`` sets remain."""
    if not 1 <= m <= dist.d:
        raise ValidationError("agglomerative_cluster", f"need 1 <= m <= d={dist.d}, got m={m}")
    return _cut(dist.d, merge_sequence(dist), m)


def _medoids(members, D) -> list[int]:
    """Every member with minimal total intra-set distance (float-tolerant ties)."""
    totals = np.array([D[i, members].sum() for i in members])
    best = totals.min()
    return [m for m, t in zip(members, totals) if math.isclose(t, best, rel_tol=1e-12, abs_tol=1e-12)]


def davies_bouldin(partition: FeaturePartition, dist: DistanceMatrix) -> float:
    """Davies-Bouldin index in the feature-distance metric, using medoids.

    When several members tie as medoid (always the case for two-member sets)
    the separation between two sets is averaged over all tied medoid pairs,
    which keeps the score independent of column order. Returns ``inf`` when
    two sets have zero separation.
    """
    if partition.m < 2:
        raise ValidationError("davies_bouldin", "index is undefined for a single set")
    if partition.d != dist.d:
        raise ValidationError("davies_bouldin", "partition and distance matrix disagree on d")
    D = np.asarray(dist.values, dtype=float)
    medoids, spread = [], []
    for s in partition.sets:
        members = list(s)
        meds = _medoids(members, D)
        medoids.append(meds)
        spread.append(float(D[meds[0], members].mean()))
    total = 0.0
    for i in range(partition.m):
        worst = 0.0
        for j in range(partition.m):
            if i == j:
                continue
            sep = float(D[np.ix_(medoids[i], medoids[j])].mean())
            if sep == 0.0:
                return math.inf
            worst = max(worst, (spread[i] + spread[j]) / sep)
        total += worst
    return total / partition.m


def candidate_range(d: int, max_m: int | None = None) -> range:
    upper = d - 1 if d > 2 else 2
    if max_m is not None:
        upper = min(upper, max_m)
    return range(2, max(upper, 2) + 1)


def select_partition(X, max_m: int | None = None, use_abs: bool = False):
    """Pick the Davies-Bouldin-optimal partition over ``m`` in [2, d-1].

    Ties go to the smaller ``m``. Returns ``(partition, scores)`` where
    ``scores`` maps each candidate ``m`` to its index.
    """
    X = np.asarray(getattr(X, "values", X), dtype=float)
    n, d = X.shape
    if d < 2:
        raise ValidationError("select_partition", f"need at least 2 features, got {d}")
    dist = corr_to_distance(pearson_corr_matrix(X), n, use_abs=use_abs)
    merges = merge_sequence(dist)
    best, scores = None, {}
    for m in candidate_range(d, max_m):
        part = _cut(d, merges, m)
        score = davies_bouldin(part, dist)
        scores[m] = score
        if best is None or score < best[0]:
            best = (score, part)
    if best[0] == math.inf:
        # every candidate rejected; fall back to the coarsest split
        best = (math.inf, _cut(d, merges, min(scores)))
    return best[1], scores


class FeatureClusterer(BaseEstimator):
    """Group the columns of ``X`` into independent feature sets.

    Parameters
    ----------
    n_sets : int or None
        Fix the number of sets (1..d) instead of searching with Davies-Bouldin.
    max_sets : int or None
        Upper bound on the searched number of sets.
    use_abs_corr : bool
        Measure distance with ``|corr|`` so anti-correlated features group.
    """

    def __init__(self, n_sets=None, max_sets=None, use_abs_corr=False):
        self.n_sets = n_sets
        self.max_sets = max_sets
        self.use_abs_corr = use_abs_corr

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=2, ensure_min_features=2)
        self.n_features_in_ = X.shape[1]
        if self.n_sets is None:
            self.partition_, self.scores_ = select_partition(X, self.max_sets, self.use_abs_corr)
        else:
            dist = corr_to_distance(pearson_corr_matrix(X), X.shape[0], use_abs=self.use_abs_corr)
            self.partition_ = agglomerative_cluster(dist, int(self.n_sets))
            self.scores_ = {}
        self.labels_ = self.partition_.labels()
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_

    @property
    def sets_(self):
        check_is_fitted(self, "partition_")
        return self.partition_.sets
