import math

import numpy as np
import pytest
from scipy import stats
from sklearn.base import clone

from mcgen.data import ScaledTable, split_by_label
from mcgen.exceptions import InvariantError, ValidationError
from mcgen.feature_clustering import FeaturePartition
from mcgen.generator import MCGen, assemble, generate, psd_repair, sample_mvn, synthesize
from mcgen.sanitizer import PrivacyConfig


def seed_table(rng, n=60, d=4):
    latent = rng.uniform(-0.5, 0.5, size=(n, 1))
    X = np.clip(latent + 0.2 * rng.uniform(-1, 1, size=(n, d)), -1, 1)
    y = np.where(np.arange(n) % 3 == 0, "pos", "neg")
    return ScaledTable(tuple(f"f{i}" for i in range(d)), X, -np.ones(d), np.ones(d), y)


class TestPsdRepair:
    def test_negative_eigenvalue(self):
        assert np.allclose(psd_repair(np.diag([1.0, -0.1])), np.diag([1.0, 1e-8]), atol=1e-15)

    def test_psd_unchanged(self):
        s = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert psd_repair(s) is s or np.array_equal(psd_repair(s), s)

    def test_symmetrizes(self):
        out = psd_repair(np.array([[1.0, 0.2], [0.0, 1.0]]))
        assert np.allclose(out, [[1.0, 0.1], [0.1, 1.0]])

    def test_min_eigenvalue(self, rng):
        A = rng.normal(size=(5, 5))
        out = psd_repair(A + A.T)
        assert np.linalg.eigvalsh(out).min() >= 1e-8 * (1 - 1e-6)
        assert np.array_equal(out, out.T)


class TestSampleMvn:
    def test_zero_covariance(self, rng):
        out = sample_mvn([0.3, -0.2], np.zeros((2, 2)), 5, rng)
        assert np.array_equal(out, np.tile([0.3, -0.2], (5, 1)))

    def test_moments(self):
        out = sample_mvn(np.zeros(3), np.eye(3), 50000, np.random.default_rng(2))
        assert np.abs(out.mean(0)).max() < 0.03
        assert np.abs(np.cov(out.T) - np.eye(3)).max() < 0.05

    def test_ks_one_dimensional(self):
        out = sample_mvn([1.0], [[4.0]], 5000, np.random.default_rng(0))[:, 0]
        assert stats.kstest(out, "norm", args=(1.0, 2.0)).pvalue > 0.01

    def test_zero_rows(self, rng):
        assert sample_mvn(np.zeros(2), np.eye(2), 0, rng).shape == (0, 2)


class TestAssemble:
    def test_column_placement_aligned(self):
        p = FeaturePartition(((0, 2), (1,)))
        blocks = [[np.array([[1.0, 3.0]])], [np.array([[2.0]])]]
        assert assemble(blocks, p, join="aligned").tolist() == [[1.0, 2.0, 3.0]]

    def test_count_mismatch(self):
        p = FeaturePartition(((0,), (1,)))
        with pytest.raises(InvariantError):
            assemble([[np.zeros((2, 1))], [np.zeros((3, 1))]], p, join="aligned")

    def test_shuffle_keeps_column_multisets(self, rng):
        p = FeaturePartition(((0,), (1,)))
        a, b = rng.normal(size=(10, 1)), rng.normal(size=(10, 1))
        rngs = [np.random.default_rng(1), np.random.default_rng(2)]
        out = assemble([[a], [b]], p, rngs, "shuffle")
        assert sorted(out[:, 0]) == sorted(a[:, 0]) and sorted(out[:, 1]) == sorted(b[:, 0])

    def test_bad_join(self):
        with pytest.raises(ValidationError):
            assemble([[np.zeros((1, 2))]], FeaturePartition(((0, 1),)), join="zip")


class TestGenerate:
    def test_multiplier_rows(self, rng):
        t = seed_table(rng)
        synth, _, _, _ = synthesize(t, PrivacyConfig(1.0, 5, rng_seed=1), multiplier=2)
        assert synth.n == 2 * t.n
        assert synth.feature_names == t.feature_names
        assert sorted(synth.labels.tolist()) == sorted(t.labels.tolist() * 2)

    def test_deterministic(self, rng):
        t = seed_table(rng)
        a = synthesize(t, PrivacyConfig(0.5, 4, rng_seed=9))[0]
        b = synthesize(t, PrivacyConfig(0.5, 4, rng_seed=9))[0]
        c = synthesize(t, PrivacyConfig(0.5, 4, rng_seed=10))[0]
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_noise_does_not_touch_sampling_stream(self, rng):
        # near-zero noise must reproduce the noiseless draws: same sampling/shuffle streams
        t = seed_table(rng)
        p = FeaturePartition(((0, 1), (2, 3)))
        parts = split_by_label(t)
        off, _ = generate(parts, p, PrivacyConfig(math.inf, 5, rng_seed=3))
        tiny, _ = generate(parts, p, PrivacyConfig(1e12, 5, rng_seed=3))
        assert np.allclose(off.values, tiny.values, atol=1e-4)

    def test_zero_noise_class_means(self, rng):
        t = seed_table(rng, n=90)
        p = FeaturePartition(((0, 1), (2, 3)))
        parts = split_by_label(t)
        means = {c: [] for c in parts}
        for rep in range(10):
            synth, _ = generate(parts, p, PrivacyConfig(math.inf, 5, rng_seed=rep))
            for c in parts:
                means[c].append(synth.values[synth.labels == c].mean(0))
        for c, seed in parts.items():
            est = np.mean(means[c], axis=0)
            se = seed.values.std(0) / math.sqrt(seed.n * 10)
            assert np.all(np.abs(est - seed.values.mean(0)) <= 3 * se + 1e-12)

    def test_clip(self, rng):
        t = seed_table(rng)
        synth = synthesize(t, PrivacyConfig(0.05, 3, rng_seed=2), clip=True)[0]
        assert synth.values.min() >= -1 and synth.values.max() <= 1

    def test_bad_multiplier(self, rng):
        t = seed_table(rng)
        with pytest.raises(ValidationError):
            synthesize(t, PrivacyConfig(1.0, 3), multiplier=0)

    def test_cluster_sizes_consistent(self, rng):
        t = seed_table(rng)
        _, models, _, _ = synthesize(t, PrivacyConfig(1.0, 4, rng_seed=0), n_sets=2)
        for cm in models:
            assert len({a.cluster_sizes for a in cm.assignments}) == 1
            assert all(min(a.cluster_sizes) >= cm.k for a in cm.assignments)


class TestEstimator:
    def test_fit_sample(self, rng):
        t = seed_table(rng)
        est = MCGen(epsilon=1.0, k=5, random_state=3).fit(t.values, t.labels)
        X, y = est.sample()
        assert X.shape == t.values.shape and set(y) == {"pos", "neg"}
        X2, _ = est.sample()
        assert np.array_equal(X, X2)
        X3, _ = est.sample(random_state=4)
        assert not np.array_equal(X, X3)

    def test_matches_functional_pipeline(self, rng):
        t = seed_table(rng)
        est = MCGen(epsilon=1.0, k=5, random_state=3)
        X, _ = est.fit_resample(t.values, t.labels)
        synth = synthesize(t, PrivacyConfig(1.0, 5, rng_seed=3))[0]
        assert np.array_equal(X, synth.values)

    def test_requires_scaled_input(self, rng):
        with pytest.raises(ValueError):
            MCGen().fit(rng.normal(size=(20, 3)) * 5, np.arange(20) % 2)

    def test_clone_and_params(self):
        est = MCGen(epsilon=0.3, k="40%")
        twin = clone(est)
        assert twin.get_params()["k"] == "40%" and twin.get_params()["epsilon"] == 0.3

    def test_released_models(self, rng):
        t = seed_table(rng)
        est = MCGen(epsilon=2.0, k=10, n_sets=2).fit(t.values, t.labels)
        assert all(m.laplace_scale > 0 for m in est.released_models_)
