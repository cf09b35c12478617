"""Per-cluster Gaussian statistics and their Laplace sanitization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .microaggregation import parse_k

LITERAL = "literal"
STRICT = "strict"
BUDGET_MODES = (LITERAL, STRICT)

# Half-width of the clipped uniform used by the inverse CDF; keeps log() finite.
_U_MAX = 0.5 - 2.0 ** -54


@dataclass(frozen=True)
class PrivacyConfig:
    """Privacy parameters.

    ``epsilon=math.inf`` switches noise off entirely (non-private reference
    runs). In ``"literal"`` mode each feature set's share is spent in full on
    both the mean and the covariance; ``"strict"`` halves it for each so the
    two releases compose to the share.
    """

    epsilon: float = 1.0
    k: int | str = 3
    budget_mode: str = LITERAL
    rng_seed: int = 0

    def __post_init__(self):
        eps = float(self.epsilon)
        if math.isnan(eps) or eps <= 0:
            raise ValidationError("PrivacyConfig", f"epsilon must be > 0, got {self.epsilon}")
        if self.budget_mode not in BUDGET_MODES:
            raise ValidationError("PrivacyConfig", f"budget_mode must be one of {BUDGET_MODES}")
        try:
            parse_k(self.k)
        except ValidationError as exc:
            raise ValidationError("PrivacyConfig", str(exc)) from None

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.epsilon)


@dataclass(frozen=True)
class ClusterModel:
    mean: np.ndarray
    covariance: np.ndarray
    size: int
    ifs_index: int = 0
    class_label: object = None

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise ValidationError("ClusterModel", "covariance must be symmetric")
        if cov.size and np.linalg.eigvalsh(cov).min() < -1e-10:
            raise ValidationError("ClusterModel", "covariance must be positive semidefinite")
        if self.size < 1:
            raise ValidationError("ClusterModel", "cluster size must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class SanitizedModel:
    mean_dp: np.ndarray
    covariance_dp: np.ndarray
    size: int
    epsilon_m: float
    sensitivity: float
    laplace_scale: float
    ifs_index: int = 0
    class_label: object = None
    budget_mode: str = LITERAL

    def audit(self) -> dict:
        return {
            "class": self.class_label,
            "ifs": self.ifs_index,
            "size": self.size,
            "epsilon_m": self.epsilon_m,
            "sensitivity": self.sensitivity,
            "laplace_scale": self.laplace_scale,
        }


def extract_stats(rows, ifs_index: int = 0, class_label=None) -> ClusterModel:
    """Column means and the biased (divide-by-n) covariance of ``rows``."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] < 1:
        raise ValidationError("extract_stats", "cluster has no rows")
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / rows.shape[0]
    cov = (cov + cov.T) / 2.0
    return ClusterModel(mean, cov, rows.shape[0], ifs_index, class_label)


def budget_split(partition, epsilon: float) -> list[float]:
    """Share ``epsilon`` across feature sets in proportion to their size.

    The last share absorbs the floating-point residue so the shares sum to
    ``epsilon``.
    """
    sizes = list(getattr(partition, "sizes", partition))
    d = sum(sizes)
    if d <= 0:
        raise ValidationError("budget_split", "partition has no features")
    if math.isinf(epsilon):
        return [math.inf] * len(sizes)
    shares = [size / d * epsilon for size in sizes]
    shares[-1] = epsilon - math.fsum(shares[:-1])
    return shares


def sensitivity(feature_set, s=None) -> float:
    """L1 sensitivity bound for a feature set: range 2 per scaled feature.

    Uses the analytic [-1, 1] bound, never observed data ranges, so ``s`` only
    serves to check the indices.
    """
    idx = list(feature_set)
    if s is not None:
        d = getattr(s, "d", None) or np.asarray(s).shape[1]
        if idx and (min(idx) < 0 or max(idx) >= d):
            raise ValidationError("sensitivity", "feature index out of range")
    return 2.0 * len(idx)


def laplace_noise(scale: float, count, rng: np.random.Generator) -> np.ndarray:
    """Laplace(0, ``scale``) draws by inverse CDF from one uniform per draw."""
    if scale < 0 or math.isnan(scale):
        raise ValidationError("laplace_noise", f"scale must be >= 0, got {scale}")
    u = rng.random(count) - 0.5
    if scale == 0:
        return np.zeros_like(u)
    u = np.clip(u, -_U_MAX, _U_MAX)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_scale(sensitivity_value: float, size: int, epsilon_m: float, budget_mode: str = LITERAL) -> float:
    if epsilon_m <= 0 or math.isnan(epsilon_m):
        raise ValidationError("sanitize", f"epsilon_m must be > 0, got {epsilon_m}")
    if budget_mode == STRICT:
        epsilon_m = epsilon_m / 2.0
    if math.isinf(epsilon_m):
        return 0.0
    return sensitivity_value / (size * epsilon_m)


def perturbation(dim: int, scale: float, rng: np.random.Generator, trials: int | None = None):
    """Noise for one (or ``trials``) mean/covariance release(s).

    Draws ``dim`` values for the mean, then ``(dim**2 + dim) / 2`` for the
    covariance which fill the upper triangle row by row and are mirrored.
    """
    shape = () if trials is None else (trials,)
    n_cov = dim * (dim + 1) // 2
    mean_noise = laplace_noise(scale, shape + (dim,), rng)
    tri = laplace_noise(scale, shape + (n_cov,), rng)
    iu = np.triu_indices(dim)
    cov_noise = np.zeros(shape + (dim, dim))
    cov_noise[..., iu[0], iu[1]] = tri
    cov_noise[..., iu[1], iu[0]] = tri
    return mean_noise, cov_noise


def sanitize(model: ClusterModel, delta: float, epsilon_m: float, config: PrivacyConfig | None = None,
             rng: np.random.Generator | None = None) -> SanitizedModel:
    """Release ``model`` with Laplace noise of scale ``delta / (size * epsilon_m)``."""
    mode = config.budget_mode if config is not None else LITERAL
    b = laplace_scale(delta, model.size, epsilon_m, mode)
    if rng is None:
        rng = np.random.default_rng()
    mean_noise, cov_noise = perturbation(model.dim, b, rng)
    return SanitizedModel(
        mean_dp=model.mean + mean_noise,
        covariance_dp=model.covariance + cov_noise,
        size=model.size,
        epsilon_m=epsilon_m,
        sensitivity=delta,
        laplace_scale=b,
        ifs_index=model.ifs_index,
        class_label=model.class_label,
        budget_mode=mode,
    )
