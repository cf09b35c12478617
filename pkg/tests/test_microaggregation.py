import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcgen.exceptions import MCGenWarning, ValidationError
from mcgen.microaggregation import MDAV, mdav, parse_k, project, resolve_k


def reference_mdav(points, k):
    """Plain-Python MDAV used as an independent oracle.

    Returns the list of groups (lists of row indices) in formation order.
    """
    pts = [list(map(float, p)) for p in points]
    left = list(range(len(pts)))
    groups = []

    def sqdist(a, b):
        return sum((x - y) ** 2 for x, y in zip(a, b))

    def farthest(target):
        best = None
        for i in left:
            dd = sqdist(pts[i], target)
            if best is None or dd > best[0]:
                best = (dd, i)
        return best[1]

    def group_around(i):
        ranked = sorted(left, key=lambda j: (sqdist(pts[j], pts[i]), j))[:k]
        for j in ranked:
            left.remove(j)
        groups.append(sorted(ranked))

    def centroid():
        return [sum(pts[i][c] for i in left) / len(left) for c in range(len(pts[0]))]

    while len(left) >= 3 * k:
        r = farthest(centroid())
        group_around(r)
        s = farthest(pts[r])
        group_around(s)
    if len(left) >= 2 * k:
        group_around(farthest(centroid()))
    if left:
        groups.append(sorted(left))
    return groups


def groups_of(assignment):
    return [sorted(assignment.members(c).tolist()) for c in range(assignment.n_clusters)]


def test_hand_trace_two_pairs():
    # centroid 5.5; rows 0 and 3 tie at 5.5 -> row 0; its nearest is row 1
    a = mdav(np.array([0.0, 1.0, 10.0, 11.0]), 2)
    assert groups_of(a) == [[0, 1], [2, 3]]
    assert a.cluster_ids.tolist() == [0, 0, 1, 1]


def test_hand_trace_remainder():
    # centroid 4.8; farthest row 4 (11); group {3, 4}; remaining 3 rows form the last group
    a = mdav(np.array([0.0, 1.0, 2.0, 10.0, 11.0]), 2)
    assert groups_of(a) == [[3, 4], [0, 1, 2]]
    assert a.cluster_sizes == (2, 3)


def test_n_equals_k():
    a = mdav(np.arange(6, dtype=float)[:, None], 6)
    assert a.cluster_sizes == (6,)


def test_n_below_k_warns():
    with pytest.warns(MCGenWarning):
        a = mdav(np.zeros((3, 2)), 5)
    assert a.cluster_sizes == (3,)


def test_k_one_warns():
    with pytest.warns(MCGenWarning):
        a = mdav(np.arange(4.0), 1)
    assert a.cluster_sizes == (1, 1, 1, 1)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 40), st.integers(1, 5), st.integers(1, 4), st.integers(0, 10**6))
def test_matches_reference_and_size_rule(n, k, d, seed):
    pts = np.random.default_rng(seed).normal(size=(n, d))
    a = mdav(pts, k)
    assert groups_of(a) == reference_mdav(pts, k)
    assert sum(a.cluster_sizes) == n
    if n >= k:
        odd = [s for s in a.cluster_sizes if s != k]
        assert len(odd) <= 1
        assert all(k <= s <= 2 * k - 1 for s in odd)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.integers(2, 4), st.integers(0, 10**6))
def test_permutation_covariance(n, k, seed):
    g = np.random.default_rng(seed)
    pts = g.normal(size=(n, 2))
    perm = g.permutation(n)
    a = groups_of(mdav(pts, k))
    b = groups_of(mdav(pts[perm], k))
    mapped = sorted(sorted(int(perm[i]) for i in grp) for grp in b)
    assert mapped == sorted(a)


def test_deterministic(rng):
    pts = rng.normal(size=(30, 3))
    assert np.array_equal(mdav(pts, 4).cluster_ids, mdav(pts.copy(), 4).cluster_ids)


class TestProject:
    def test_full_and_single(self, rng):
        X = rng.normal(size=(5, 3))
        assert np.array_equal(project(X, [0, 1, 2]), X)
        assert project(X, [1]).shape == (5, 1)

    def test_errors(self, rng):
        X = rng.normal(size=(5, 3))
        with pytest.raises(ValidationError):
            project(X, [3])
        with pytest.raises(ValidationError):
            project(X, [])


class TestK:
    @pytest.mark.parametrize("text,expected", [(3, (3, False)), ("7", (7, False)), ("40%", (40.0, True))])
    def test_parse(self, text, expected):
        assert parse_k(text) == expected

    @pytest.mark.parametrize("bad", [0, "0%", "150%", "abc", -2, 2.5])
    def test_parse_errors(self, bad):
        with pytest.raises(ValidationError):
            parse_k(bad)

    def test_resolve(self):
        assert resolve_k("20%", 400) == 80
        assert resolve_k("100%", 214) == 214
        assert resolve_k("20%", 2) == 1
        assert resolve_k(5, 400) == 5


def test_estimator(rng):
    X = rng.normal(size=(20, 2))
    est = MDAV(k=4)
    labels = est.fit_predict(X)
    assert len(labels) == 20 and est.cluster_sizes_ == (4,) * 5
