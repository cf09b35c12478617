"""Closed-form noise totals for the multi-level and sample-level-only paths.

Two quantities are tracked for each path and each release (mean, covariance):

* ``scale-sum``: Laplace scale times number of noisy entries, summed over
  clusters and feature sets. This is what the noise theorems write down.
* ``variance-sum``: the same sum with the true Laplace variance ``2 b**2``
  per entry. This is what :func:`monte_carlo_noise_check` measures.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _rng
from .exceptions import ValidationError
from .sanitizer import LITERAL, budget_split, laplace_scale, perturbation


def _check(cluster_sizes, epsilon):
    sizes = np.asarray(list(cluster_sizes), dtype=float)
    if sizes.size == 0 or np.any(sizes < 1):
        raise ValidationError("noise_accountant", "cluster sizes must be >= 1")
    if not epsilon > 0:
        raise ValidationError("noise_accountant", f"epsilon must be > 0, got {epsilon}")
    return sizes


def noise_mean_ifs(partition_sizes, cluster_sizes, sensitivities, epsilon: float) -> float:
    """``sum_j (sum_m Delta_m) * d / (|C_j| * epsilon)``."""
    sizes = _check(cluster_sizes, epsilon)
    d = sum(partition_sizes)
    return float(math.fsum(sensitivities) * d * np.sum(1.0 / sizes) / epsilon)


def noise_cov_ifs(partition_sizes, cluster_sizes, sensitivities, epsilon: float) -> float:
    """``sum_j (sum_m d_m * Delta_m) * d / (|C_j| * epsilon)``."""
    sizes = _check(cluster_sizes, epsilon)
    d = sum(partition_sizes)
    weighted = math.fsum(dm * delta for dm, delta in zip(partition_sizes, sensitivities))
    return float(weighted * d * np.sum(1.0 / sizes) / epsilon)


def noise_mean_noifs(cluster_sizes, delta_d: float, epsilon: float, d: int) -> float:
    """``sum_j Delta_D * d / (|C_j| * epsilon)``."""
    sizes = _check(cluster_sizes, epsilon)
    return float(delta_d * d * np.sum(1.0 / sizes) / epsilon)


def noise_cov_noifs(cluster_sizes, delta_d: float, epsilon: float, d: int) -> float:
    """``sum_j Delta_D * d**2 / (|C_j| * epsilon)``."""
    sizes = _check(cluster_sizes, epsilon)
    return float(delta_d * d * d * np.sum(1.0 / sizes) / epsilon)


@dataclass
class NoiseReport:
    n_ifs_mean: float
    n_ifs_cov: float
    n_noifs_mean: float
    n_noifs_cov: float
    var_ifs_mean: float
    var_ifs_cov: float
    var_noifs_mean: float
    var_noifs_cov: float
    partition_sizes: list
    cluster_sizes: list
    sensitivities: list
    delta_d: float
    epsilon: float
    budget_mode: str = LITERAL
    per_ifs: list = field(default_factory=list)

    def check(self, rtol: float = 1e-9) -> None:
        """Raise if the mean totals differ or the covariance total grew."""
        if not math.isclose(self.n_ifs_mean, self.n_noifs_mean, rel_tol=rtol):
            raise AssertionError(f"mean noise differs: {self.n_ifs_mean} vs {self.n_noifs_mean}")
        if self.n_ifs_cov > self.n_noifs_cov * (1 + rtol):
            raise AssertionError(f"covariance noise grew: {self.n_ifs_cov} > {self.n_noifs_cov}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scale_sum"] = {
            "ifs": {"mean": self.n_ifs_mean, "cov": self.n_ifs_cov},
            "noifs": {"mean": self.n_noifs_mean, "cov": self.n_noifs_cov},
        }
        out["variance_sum"] = {
            "ifs": {"mean": self.var_ifs_mean, "cov": self.var_ifs_cov},
            "noifs": {"mean": self.var_noifs_mean, "cov": self.var_noifs_cov},
        }
        return out


def _scales(partition_sizes, cluster_sizes, sensitivities, epsilon, budget_mode):
    """Laplace scale for each (feature set, cluster), as the sanitizer computes it."""
    shares = budget_split(partition_sizes, epsilon)
    return [
        [laplace_scale(delta, int(c), eps_m, budget_mode) for c in cluster_sizes]
        for delta, eps_m in zip(sensitivities, shares)
    ]


def variance_totals(partition_sizes, cluster_sizes, sensitivities, epsilon, budget_mode=LITERAL):
    """``(mean, cov)`` sums of ``2 b**2`` over every noisy entry, full matrices."""
    scales = _scales(partition_sizes, cluster_sizes, sensitivities, epsilon, budget_mode)
    mean = math.fsum(2 * b * b * dm for dm, row in zip(partition_sizes, scales) for b in row)
    cov = math.fsum(2 * b * b * dm * dm for dm, row in zip(partition_sizes, scales) for b in row)
    return mean, cov


def noise_report(partition_sizes, cluster_sizes, epsilon: float, sensitivities=None,
                 budget_mode: str = LITERAL) -> NoiseReport:
    """Both paths' totals for one class.

    ``sensitivities`` default to the analytic ``2 * d_m`` bound the sanitizer
    uses; the sample-level path uses their sum over all features.
    """
    partition_sizes = [int(s) for s in partition_sizes]
    cluster_sizes = [int(c) for c in cluster_sizes]
    if sensitivities is None:
        sensitivities = [2.0 * dm for dm in partition_sizes]
    sensitivities = [float(s) for s in sensitivities]
    d = sum(partition_sizes)
    delta_d = math.fsum(sensitivities)
    var_mean, var_cov = variance_totals(partition_sizes, cluster_sizes, sensitivities, epsilon, budget_mode)
    nv_mean, nv_cov = variance_totals([d], cluster_sizes, [delta_d], epsilon, budget_mode)
    scales = _scales(partition_sizes, cluster_sizes, sensitivities, epsilon, budget_mode)
    per_ifs = [
        {"d_m": dm, "sensitivity": delta, "epsilon_m": eps_m, "laplace_scales": row}
        for dm, delta, eps_m, row in zip(partition_sizes, sensitivities, budget_split(partition_sizes, epsilon), scales)
    ]
    return NoiseReport(
        n_ifs_mean=noise_mean_ifs(partition_sizes, cluster_sizes, sensitivities, epsilon),
        n_ifs_cov=noise_cov_ifs(partition_sizes, cluster_sizes, sensitivities, epsilon),
        n_noifs_mean=noise_mean_noifs(cluster_sizes, delta_d, epsilon, d),
        n_noifs_cov=noise_cov_noifs(cluster_sizes, delta_d, epsilon, d),
        var_ifs_mean=var_mean,
        var_ifs_cov=var_cov,
        var_noifs_mean=nv_mean,
        var_noifs_cov=nv_cov,
        partition_sizes=partition_sizes,
        cluster_sizes=cluster_sizes,
        sensitivities=sensitivities,
        delta_d=delta_d,
        epsilon=epsilon,
        budget_mode=budget_mode,
        per_ifs=per_ifs,
    )


def monte_carlo_noise_check(partition_sizes, cluster_sizes, epsilon: float, trials: int,
                            budget_mode: str = LITERAL, seed: int = 0) -> dict:
    """Measure the noise the sanitizer injects into all-zero statistics.

    Every (feature set, cluster) release is repeated ``trials`` times; the
    per-entry sample variances are summed over mean vectors and full
    covariance matrices and returned next to :func:`variance_totals`.
    """
    if trials < 2:
        raise ValidationError("monte_carlo_noise_check", f"need at least 2 trials, got {trials}")
    partition_sizes = [int(s) for s in partition_sizes]
    sensitivities = [2.0 * dm for dm in partition_sizes]
    scales = _scales(partition_sizes, cluster_sizes, sensitivities, epsilon, budget_mode)
    emp_mean = emp_cov = 0.0
    for m, (dm, row) in enumerate(zip(partition_sizes, scales)):
        for j, b in enumerate(row):
            rng = _rng.substream(seed, _rng.MONTE_CARLO, m, j)
            mean_noise, cov_noise = perturbation(dm, b, rng, trials=trials)
            emp_mean += float(mean_noise.var(axis=0, ddof=1).sum())
            emp_cov += float(cov_noise.var(axis=0, ddof=1).sum())
    exp_mean, exp_cov = variance_totals(partition_sizes, cluster_sizes, sensitivities, epsilon, budget_mode)
    return {
        "trials": trials,
        "empirical_mean": emp_mean,
        "empirical_cov": emp_cov,
        "expected_mean": exp_mean,
        "expected_cov": exp_cov,
    }
