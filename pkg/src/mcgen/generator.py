"""Synthetic data generation from sanitized per-cluster Gaussians."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, check_X_y

from . import _rng
from .data import Encoding, ScaledTable, split_by_label, decode_rows, inverse_scale, write_csv
from .exceptions import InvariantError, ValidationError
from .feature_clustering import FeaturePartition, agglomerative_cluster, corr_to_distance, pearson_corr_matrix, select_partition
from .microaggregation import ClusterAssignment, mdav, project, resolve_k
from .sanitizer import LITERAL, PrivacyConfig, SanitizedModel, budget_split, extract_stats, sanitize, sensitivity

logger = logging.getLogger(__name__)

PSD_FLOOR = 1e-8
JOIN_MODES = ("shuffle", "aligned")


def psd_repair(sigma, floor: float = PSD_FLOOR) -> np.ndarray:
    """Nearest-in-spectrum PSD matrix: eigenvalues below ``floor`` are raised to it.

    Matrices whose spectrum is already above the floor are returned as is.
    """
    sigma = np.asarray(sigma, dtype=float)
    if not np.array_equal(sigma, sigma.T):
        logger.debug("symmetrizing non-symmetric covariance")
        sigma = (sigma + sigma.T) / 2.0
    w, v = np.linalg.eigh(sigma)
    if w.min() >= floor:
        return sigma
    repaired = (v * np.maximum(w, floor)) @ v.T
    return (repaired + repaired.T) / 2.0


def sample_mvn(mean, covariance, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` rows of N(mean, covariance) as ``mean + L z``.

    ``L`` comes from the eigendecomposition, so singular covariances work.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    d = mean.shape[0]
    if count == 0:
        return np.empty((0, d))
    w, v = np.linalg.eigh((cov + cov.T) / 2.0)
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    z = rng.standard_normal((count, d))
    return mean + z @ factor.T


def assemble(per_ifs_blocks, partition: FeaturePartition, rngs=None, join: str = "shuffle") -> np.ndarray:
    """Join per-feature-set blocks into complete rows in the original column order.

    ``per_ifs_blocks[m]`` is the list of cluster blocks for feature set ``m``;
    blocks are stacked in cluster order. With ``join="shuffle"`` and more than
    one feature set, each stacked set is independently permuted (using
    ``rngs[m]``) before the row-wise join.
    """
    if join not in JOIN_MODES:
        raise ValidationError("assemble", f"join must be one of {JOIN_MODES}")
    if len(per_ifs_blocks) != partition.m:
        raise InvariantError("one block list per feature set expected")
    stacked = []
    for m, blocks in enumerate(per_ifs_blocks):
        width = len(partition.sets[m])
        stacked.append(np.vstack(blocks) if len(blocks) else np.empty((0, width)))
    counts = {s.shape[0] for s in stacked}
    if len(counts) != 1:
        raise InvariantError(f"feature sets produced different row counts: {sorted(counts)}")
    n = counts.pop()
    out = np.empty((n, partition.d))
    for m, (cols, block) in enumerate(zip(partition.sets, stacked)):
        if join == "shuffle" and partition.m > 1:
            block = block[rngs[m].permutation(n)]
        out[:, list(cols)] = block
    return out


@dataclass
class ClassModel:
    """Everything released for one class: clusterings and sanitized models."""

    label: object
    index: int
    n: int
    k: int
    assignments: list[ClusterAssignment]
    models: list[list[SanitizedModel]]
    covariances: list[list[np.ndarray]]


@dataclass
class SyntheticTable:
    feature_names: tuple
    values: np.ndarray
    labels: np.ndarray
    label_name: str = "label"
    mins: np.ndarray | None = None
    maxs: np.ndarray | None = None
    encoding: Encoding | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def to_rows(self, scaled: bool = False):
        values = self.values
        if not scaled:
            if self.mins is None:
                raise ValidationError("SyntheticTable", "no scaling metadata for inverse transform")
            values = inverse_scale(values, self.mins, self.maxs)
            return decode_rows(values, self.labels, self.encoding, self.feature_names, self.label_name)
        header = list(self.feature_names) + [self.label_name]
        return header, [list(map(float, v)) + [lab] for v, lab in zip(values, self.labels)]

    def write_csv(self, path, scaled: bool = False) -> None:
        header, rows = self.to_rows(scaled)
        write_csv(path, header, rows)


def fit_class_model(X, partition: FeaturePartition, config: PrivacyConfig, class_index: int = 0,
                    label=None) -> ClassModel:
    """Cluster, summarize and sanitize one class's rows."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    k = resolve_k(config.k, n)
    shares = budget_split(partition, config.epsilon)
    assignments, models, covs = [], [], []
    for m, feature_set in enumerate(partition.sets):
        sub = project(X, feature_set)
        assignment = mdav(sub, k)
        delta = sensitivity(feature_set)
        released, repaired = [], []
        for c in range(assignment.n_clusters):
            stats = extract_stats(sub[assignment.members(c)], m, label)
            rng = _rng.substream(config.rng_seed, _rng.NOISE, class_index, m, c)
            model = sanitize(stats, delta, shares[m], config, rng)
            released.append(model)
            repaired.append(psd_repair(model.covariance_dp))
        assignments.append(assignment)
        models.append(released)
        covs.append(repaired)
    sizes = {a.cluster_sizes for a in assignments}
    if len(sizes) != 1:
        raise InvariantError("cluster sizes differ across feature sets of one class")
    return ClassModel(label, class_index, n, k, assignments, models, covs)


def sample_class(model: ClassModel, partition: FeaturePartition, seed: int, multiplier: int = 1,
                 join: str = "shuffle") -> np.ndarray:
    blocks = []
    for m in range(partition.m):
        per_cluster = []
        for c, (released, cov) in enumerate(zip(model.models[m], model.covariances[m])):
            rng = _rng.substream(seed, _rng.SAMPLE, model.index, m, c)
            per_cluster.append(sample_mvn(released.mean_dp, cov, released.size * multiplier, rng))
        blocks.append(per_cluster)
    rngs = [_rng.substream(seed, _rng.SHUFFLE, model.index, m) for m in range(partition.m)]
    return assemble(blocks, partition, rngs, join)


def generate(seed_class_tables: dict, partition: FeaturePartition, config: PrivacyConfig, multiplier: int = 1,
             clip: bool = False, join: str = "shuffle"):
    """Run the per-class pipeline and return ``(SyntheticTable, class_models)``.

    Classes are processed in sorted label order; ``config.rng_seed`` is the
    master seed for every noise, sampling and shuffle substream.
    """
    if multiplier < 1:
        raise ValidationError("generate", f"multiplier must be >= 1, got {multiplier}")
    if not seed_class_tables:
        raise ValidationError("generate", "no classes to synthesize")
    labels = sorted(seed_class_tables)
    first = seed_class_tables[labels[0]]
    class_models, values, ys = [], [], []
    for index, label in enumerate(labels):
        table = seed_class_tables[label]
        cm = fit_class_model(table.values, partition, config, index, label)
        rows = sample_class(cm, partition, config.rng_seed, multiplier, join)
        if rows.shape[0] != multiplier * table.n:
            raise InvariantError("synthetic row count does not match multiplier * class size")
        class_models.append(cm)
        values.append(rows)
        ys.extend([label] * rows.shape[0])
    values = np.vstack(values)
    if clip:
        values = np.clip(values, -1.0, 1.0)
    provenance = {
        "epsilon": config.epsilon,
        "k": config.k,
        "budget_mode": config.budget_mode,
        "rng_seed": config.rng_seed,
        "multiplier": multiplier,
        "clip": clip,
        "join": join,
        "partition": [list(s) for s in partition.sets],
    }
    synth = SyntheticTable(
        first.feature_names,
        values,
        np.array(ys, dtype=object),
        first.label_name,
        first.mins,
        first.maxs,
        first.encoding,
        provenance,
    )
    return synth, class_models


def learn_partition(X, n_sets=None, max_sets=None, use_abs_corr=False):
    """Feature partition of ``X``; returns ``(partition, davies_bouldin_scores)``."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    if n_sets is None:
        return select_partition(X, max_sets, use_abs_corr)
    dist = corr_to_distance(pearson_corr_matrix(X), X.shape[0], use_abs=use_abs_corr)
    return agglomerative_cluster(dist, int(n_sets)), {}


def synthesize(seed: ScaledTable, config: PrivacyConfig, multiplier: int = 1, clip: bool = False,
               join: str = "shuffle", n_sets=None, max_sets=None, use_abs_corr=False):
    """Full pipeline on a scaled seed table.

    Returns ``(SyntheticTable, class_models, partition, scores)``.
    """
    partition, scores = learn_partition(seed, n_sets, max_sets, use_abs_corr)
    synth, class_models = generate(split_by_label(seed), partition, config, multiplier, clip, join)
    return synth, class_models, partition, scores


class MCGen(BaseEstimator):
    """Differentially private synthetic data generator for labelled tables.

    ``fit`` learns a feature partition, microaggregates every class within
    each feature set and releases Laplace-perturbed Gaussian parameters per
    cluster; ``sample`` draws synthetic rows from them. Input features must
    already be scaled to [-1, 1] (see :class:`mcgen.data.UnitScaler`), since
    the noise is calibrated to that range.

    Parameters
    ----------
    epsilon : float
        Total privacy budget; ``math.inf`` disables noise.
    k : int or str
        Microaggregation size, absolute or as a per-class percentage (``"40%"``).
    multiplier : int
        Synthetic rows per seed row.
    budget_mode : {"literal", "strict"}
    clip : bool
        Clamp synthetic values into [-1, 1].
    join : {"shuffle", "aligned"}
        How rows from different feature sets are paired.
    n_sets, max_sets, use_abs_corr
        Forwarded to :class:`FeatureClusterer`.
    random_state : int
    """

    def __init__(self, epsilon=1.0, k="20%", multiplier=1, budget_mode=LITERAL, clip=False, join="shuffle",
                 n_sets=None, max_sets=None, use_abs_corr=False, random_state=0):
        self.epsilon = epsilon
        self.k = k
        self.multiplier = multiplier
        self.budget_mode = budget_mode
        self.clip = clip
        self.join = join
        self.n_sets = n_sets
        self.max_sets = max_sets
        self.use_abs_corr = use_abs_corr
        self.random_state = random_state

    def _config(self) -> PrivacyConfig:
        return PrivacyConfig(float(self.epsilon), self.k, self.budget_mode, int(self.random_state or 0))

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, ensure_min_samples=2, ensure_min_features=2)
        if X.min() < -1.0 or X.max() > 1.0:
            raise ValueError("MCGen expects features scaled to [-1, 1]")
        config = self._config()
        self.n_features_in_ = X.shape[1]
        self.partition_, self.scores_ = learn_partition(X, self.n_sets, self.max_sets, self.use_abs_corr)
        self.classes_ = np.array(sorted(set(y.tolist())), dtype=y.dtype)
        self.class_models_ = [
            fit_class_model(X[y == label], self.partition_, config, i, label) for i, label in enumerate(self.classes_)
        ]
        return self

    def sample(self, random_state=None):
        """Return ``(X_synthetic, y_synthetic)``.

        ``random_state`` overrides the sampling seed only; the released
        parameters are fixed at ``fit``.
        """
        check_is_fitted(self, "class_models_")
        seed = int(self.random_state or 0) if random_state is None else int(random_state)
        xs, ys = [], []
        for cm in self.class_models_:
            rows = sample_class(cm, self.partition_, seed, int(self.multiplier), self.join)
            xs.append(rows)
            ys.append(np.full(rows.shape[0], cm.label, dtype=self.classes_.dtype))
        X = np.vstack(xs)
        if self.clip:
            X = np.clip(X, -1.0, 1.0)
        return X, np.concatenate(ys)

    def fit_resample(self, X, y):
        return self.fit(X, y).sample()

    @property
    def released_models_(self) -> list[SanitizedModel]:
        check_is_fitted(self, "class_models_")
        return [m for cm in self.class_models_ for per_ifs in cm.models for m in per_ifs]
