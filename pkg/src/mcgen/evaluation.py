"""Classification-utility protocol: logistic regression and F1."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import _rng
from .data import SplitSpec, Table, apply_scaling, scale_to_unit, stratified_indices, subset_table
from .exceptions import ValidationError
from .generator import synthesize
from .sanitizer import PrivacyConfig

logger = logging.getLogger(__name__)


def f1_score(predictions, truth, positive_class):
    """``(precision, recall, f1)`` for ``positive_class``.

    Zero denominators give 0 for the affected quantity.
    """
    predictions = np.asarray(predictions, dtype=object)
    truth = np.asarray(truth, dtype=object)
    if predictions.shape != truth.shape:
        raise ValidationError("f1_score", "predictions and truth differ in length")
    if truth.size == 0:
        raise ValidationError("f1_score", "empty input")
    pred_pos = predictions == positive_class
    true_pos = truth == positive_class
    tp = int(np.sum(pred_pos & true_pos))
    fp = int(np.sum(pred_pos & ~true_pos))
    fn = int(np.sum(~pred_pos & true_pos))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def weighted_f1(predictions, truth) -> float:
    """Per-class F1 averaged with weights equal to each class's share of ``truth``."""
    truth = np.asarray(truth, dtype=object)
    total = 0.0
    for label in set(truth.tolist()):
        support = np.mean(truth == label)
        total += support * f1_score(predictions, truth, label)[2]
    return float(total)


class LogisticRegressionGD(ClassifierMixin, BaseEstimator):
    """Binary logistic regression fitted by full-batch gradient descent.

    Weights start at zero. The loss is mean log-loss plus
    ``alpha / 2 * ||w||**2`` (the intercept is not penalized). Training stops
    when the gradient norm drops below ``tol`` or after ``max_iter`` steps.

    Attributes
    ----------
    coef_, intercept_ : fitted parameters
    loss_curve_ : list of float
        Loss before the first step and after every step.
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, learning_rate=1.0, max_iter=5000, alpha=1e-4, tol=1e-6):
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.alpha = alpha
        self.tol = tol

    def _loss_grad(self, X, t, w, b):
        z = X @ w + b
        p = 1.0 / (1.0 + np.exp(-z))
        # log(1 + e^z) - t z, computed stably
        loss = np.mean(np.logaddexp(0.0, z) - t * z) + 0.5 * self.alpha * w @ w
        r = (p - t) / X.shape[0]
        return loss, X.T @ r + self.alpha * w, r.sum()

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        classes = np.unique(y)
        if len(classes) < 2:
            raise ValueError(f"training data contains only one class: {classes[0]!s}")
        if len(classes) > 2:
            raise ValueError("only binary classification is supported")
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        t = (y == classes[1]).astype(float)
        w = np.zeros(X.shape[1])
        b = 0.0
        loss, gw, gb = self._loss_grad(X, t, w, b)
        self.loss_curve_ = [float(loss)]
        self.converged_ = False
        self.n_iter_ = 0
        for _ in range(int(self.max_iter)):
            if np.sqrt(gw @ gw + gb * gb) < self.tol:
                self.converged_ = True
                break
            w = w - self.learning_rate * gw
            b = b - self.learning_rate * gb
            self.n_iter_ += 1
            loss, gw, gb = self._loss_grad(X, t, w, b)
            self.loss_curve_.append(float(loss))
        self.coef_ = w[None, :]
        self.intercept_ = np.array([b])
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        return X @ self.coef_[0] + self.intercept_[0]

    def predict_proba(self, X):
        p = 1.0 / (1.0 + np.exp(-self.decision_function(X)))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return np.where(self.predict_proba(X)[:, 1] >= 0.5, self.classes_[1], self.classes_[0])


DEFAULT_HYPER = {"learning_rate": 1.0, "max_iter": 5000, "alpha": 1e-4, "tol": 1e-6}


def train_logreg(X, y, learning_rate=1.0, iterations=5000, l2=1e-4, tol=1e-6) -> LogisticRegressionGD:
    return LogisticRegressionGD(learning_rate, iterations, l2, tol).fit(X, y)


@dataclass
class EvalReport:
    scenario: int
    classifier: str
    precision: float
    recall: float
    f1: float
    f1_mean: float
    f1_weighted: float
    positive_class: object
    epsilon: float
    k: object
    rng_seed: int
    dataset: str
    repetitions: int
    mode: str = "synthetic"
    f1_runs: list = field(default_factory=list)
    f1_weighted_runs: list = field(default_factory=list)
    failed: int = 0
    hyperparameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def prepare_split(table: Table, scenario: int, rng_seed: int, seed_fraction: float | None = None):
    """Stratified seed/holdout split scaled with seed-only (min, max).

    ``table`` must be one-hot encoded already. Returns ``(seed, holdout)``
    ScaledTables; holdout values outside the seed range are clipped.
    """
    spec = SplitSpec.for_scenario(scenario, rng_seed, seed_fraction)
    seed_idx, holdout_idx, _ = stratified_indices(table.labels(), spec.seed_fraction, spec.rng_seed)
    seed = scale_to_unit(subset_table(table, seed_idx))
    holdout = apply_scaling(subset_table(table, holdout_idx), seed)
    return seed, holdout


def _one_round(table, scenario, config, rep, multiplier, positive_class, hyper, baseline, gen_kwargs):
    rep_seed = _rng.derive_seed(config.rng_seed, _rng.REPETITION, rep)
    seed, holdout = prepare_split(table, scenario, rep_seed)
    if baseline:
        other_x, other_y = seed.values, seed.labels
    else:
        synth, *_ = synthesize(seed, replace(config, rng_seed=rep_seed), multiplier, **gen_kwargs)
        other_x, other_y = synth.values, synth.labels
    if scenario == 1:
        train_x, train_y, test_x, test_y = holdout.values, holdout.labels, other_x, other_y
    else:
        train_x, train_y, test_x, test_y = other_x, other_y, holdout.values, holdout.labels
    clf = LogisticRegressionGD(**hyper).fit(train_x, train_y.astype(str))
    pred = clf.predict(test_x)
    truth = test_y.astype(str)
    p, r, f1 = f1_score(pred, truth, str(positive_class))
    return p, r, f1, weighted_f1(pred, truth)


def run_scenario(table: Table, scenario: int, config: PrivacyConfig, repetitions: int = 20, multiplier: int = 1,
                 positive_class=None, dataset: str = "dataset", baseline: bool = False, hyper: dict | None = None,
                 n_jobs: int = 1, **gen_kwargs) -> EvalReport:
    """Repeat the train/test protocol of ``scenario`` and average the scores.

    Scenario 1 trains on the 80% original holdout and tests on data
    synthesized from the 20% seed; scenario 2 trains on data synthesized from
    the 80% seed and tests on the 20% holdout. With ``baseline=True`` the
    seed itself replaces the synthetic data. Round ``r`` uses a seed derived
    from ``(config.rng_seed, r)``, so rounds pair up across configurations.
    """
    if repetitions < 1:
        raise ValidationError("run_scenario", "repetitions must be >= 1")
    if scenario not in (1, 2):
        raise ValidationError("run_scenario", f"scenario must be 1 or 2, got {scenario}")
    hyper = {**DEFAULT_HYPER, **(hyper or {})}
    labels = sorted(set(table.labels().tolist()))
    if positive_class is None:
        positive_class = labels[-1]
    if str(positive_class) not in map(str, labels):
        raise ValidationError("run_scenario", f"positive class {positive_class!r} not among {labels}")

    def work(rep):
        try:
            return _one_round(table, scenario, config, rep, multiplier, positive_class, hyper, baseline, gen_kwargs)
        except (ValidationError, ValueError, np.linalg.LinAlgError) as exc:
            logger.warning("round %d failed: %s", rep, exc)
            return None

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, range(repetitions)))
    else:
        results = [work(rep) for rep in range(repetitions)]
    ok = [r for r in results if r is not None]
    mean = np.mean(ok, axis=0) if ok else [float("nan")] * 4
    precision, recall = float(mean[0]), float(mean[1])
    # harmonic mean of the averaged precision/recall; f1_mean averages per-round F1
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(
        scenario=scenario,
        classifier="logistic_regression_gd",
        precision=precision,
        recall=recall,
        f1=f1 if ok else float("nan"),
        f1_mean=float(mean[2]),
        f1_weighted=float(mean[3]),
        positive_class=positive_class,
        epsilon=config.epsilon,
        k=config.k,
        rng_seed=config.rng_seed,
        dataset=dataset,
        repetitions=repetitions,
        mode="baseline" if baseline else "synthetic",
        f1_runs=[None if r is None else r[2] for r in results],
        f1_weighted_runs=[None if r is None else r[3] for r in results],
        failed=repetitions - len(ok),
        hyperparameters=hyper,
    )
