import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import comb

from argem.autodiff import ContractError
from argem.cluster import (
    ari,
    cluster_embedding,
    clustering_accuracy,
    clustering_scores,
    contingency,
    f1_and_precision,
    kmeans,
    nmi,
)

seeds = st.integers(0, 2**32 - 1)
SIX_PRED = [0, 0, 0, 1, 1, 1]
SIX_TRUE = [0, 0, 1, 1, 1, 0]  # contingency [[2, 1], [1, 2]]


def labelings(seed, n=None, k=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 40))
    k = k or int(rng.integers(1, 5))
    return rng.integers(0, k, size=n), rng.integers(0, int(rng.integers(1, 5)), size=n)


# -- k-means ------------------------------------------------------------------------

def test_kmeans_separates_two_clouds(rng):
    a = rng.normal(size=(30, 2)) * 0.1
    b = rng.normal(size=(30, 2)) * 0.1 + 10
    res = kmeans(np.vstack([a, b]), 2, seed=0)
    assert len(set(res.labels[:30])) == 1 and len(set(res.labels[30:])) == 1
    assert res.labels[0] != res.labels[-1]


def test_kmeans_k_equals_n(rng):
    z = rng.normal(size=(7, 3))
    res = kmeans(z, 7)
    assert res.inertia == pytest.approx(0.0, abs=1e-20)
    assert sorted(res.labels.tolist()) == list(range(7))


def test_kmeans_beats_random_assignments():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(50, 2))
    res = kmeans(z, 3, seed=0)
    for _ in range(100):
        lab = rng.integers(0, 3, size=50)
        inertia = sum(((z[lab == c] - z[lab == c].mean(axis=0)) ** 2).sum() for c in range(3) if (lab == c).any())
        assert res.inertia <= inertia + 1e-12
    assert set(res.labels.tolist()) == {0, 1, 2}


def test_kmeans_deterministic_and_errors(rng):
    z = rng.normal(size=(40, 2))
    assert np.array_equal(kmeans(z, 4, seed=3).labels, kmeans(z, 4, seed=3).labels)
    with pytest.raises(ContractError):
        kmeans(z, 41)
    with pytest.raises(ContractError):
        kmeans(np.full((3, 2), np.nan), 2)


# -- metrics: fixed oracles ------------------------------------------------------------

def test_contingency_six_points():
    np.testing.assert_array_equal(contingency(SIX_PRED, SIX_TRUE), [[2, 1], [1, 2]])


def test_accuracy_examples():
    t = [0, 1, 2, 2, 1, 0]
    assert clustering_accuracy(t, t) == 1.0
    assert clustering_accuracy([5, 9, 7, 7, 9, 5], t) == 1.0
    assert clustering_accuracy(SIX_PRED, SIX_TRUE) == pytest.approx(4 / 6)
    with pytest.raises(ContractError):
        clustering_accuracy([0, 1], [0])


def pair_count_ari(pred, truth):
    """Adjusted Rand index by enumerating all pairs."""
    n = len(pred)
    a = b = c = d = 0
    for i, j in itertools.combinations(range(n), 2):
        same_p, same_t = pred[i] == pred[j], truth[i] == truth[j]
        a += same_p and same_t
        b += same_p and not same_t
        c += same_t and not same_p
        d += not same_p and not same_t
    total = comb(n, 2)
    expected = (a + b) * (a + c) / total
    max_index = ((a + b) + (a + c)) / 2
    return (a - expected) / (max_index - expected)


def test_ari_six_points_pair_count():
    assert ari(SIX_PRED, SIX_TRUE) == pytest.approx(pair_count_ari(SIX_PRED, SIX_TRUE), rel=1e-12)
    assert ari(SIX_PRED, SIX_TRUE) == pytest.approx(-1 / 9, rel=1e-12)


def test_identical_labelings_score_one():
    t = [0, 0, 1, 1, 2, 2, 2]
    s = clustering_scores(t, t)
    assert s == pytest.approx({"acc": 1.0, "nmi": 1.0, "f1": 1.0, "precision": 1.0, "ari": 1.0}, abs=1e-15)


def test_independent_labelings_score_near_zero():
    rng = np.random.default_rng(0)
    t = rng.integers(0, 5, size=10_000)
    p = rng.integers(0, 5, size=10_000)
    assert abs(nmi(p, t)) < 0.05 and abs(ari(p, t)) < 0.05


def test_nmi_single_cluster_is_zero_with_warning():
    with pytest.warns(RuntimeWarning):
        assert nmi([0, 0, 0], [0, 1, 1]) == 0.0


def test_nmi_hand_value():
    # pred {0,0,1,1}, truth {0,1,0,1}: independent -> MI 0
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-15)
    # H(pred)=log 2, H(truth)=log 2, MI=log 2 - (1/2) log 2 ... for [[2,1],[1,2]]
    p = np.array([[2, 1], [1, 2]]) / 6
    mi = sum(p[i, j] * np.log(p[i, j] / 0.25) for i in range(2) for j in range(2))
    assert nmi(SIX_PRED, SIX_TRUE) == pytest.approx(mi / np.log(2), rel=1e-12)
    assert nmi(SIX_PRED, SIX_TRUE, "geometric") == pytest.approx(mi / np.log(2), rel=1e-12)
    with pytest.raises(ValueError):
        nmi(SIX_PRED, SIX_TRUE, "max")


def test_f1_precision_hand_value():
    f1, prec = f1_and_precision(SIX_PRED, SIX_TRUE)
    assert prec == pytest.approx(2 / 3) and f1 == pytest.approx(2 / 3)
    # extra unmatched cluster: class 1 gets precision 1, recall 1/2
    f1, prec = f1_and_precision([0, 0, 1, 2], [0, 0, 1, 1])
    assert prec == pytest.approx(1.0) and f1 == pytest.approx((1 + 2 / 3) / 2)


# -- metrics: properties -------------------------------------------------------------

@given(seeds, st.permutations(range(5)))
def test_metrics_invariant_under_relabeling(seed, perm):
    pred, truth = labelings(seed)
    relabeled = np.asarray(perm)[pred]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = clustering_scores(pred, truth)
        b = clustering_scores(relabeled, truth)
    for key in a:
        assert a[key] == pytest.approx(b[key], rel=1e-12, abs=1e-14), key


@given(seeds)
def test_metric_ranges(seed):
    pred, truth = labelings(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        s = clustering_scores(pred, truth)
    for key in ("acc", "nmi", "f1", "precision"):
        assert 0.0 <= s[key] <= 1.0
    assert s["ari"] <= 1.0 + 1e-12


@settings(max_examples=300)
@given(seeds, st.integers(1, 8))
def test_accuracy_equals_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    pred = rng.integers(0, 2, size=n)
    truth = rng.integers(0, 2, size=n)
    best = max(np.mean(np.asarray(perm)[pred] == truth) for perm in itertools.permutations(range(2)))
    assert clustering_accuracy(pred, truth) == pytest.approx(best, abs=1e-15)


@settings(max_examples=300)
@given(seeds, st.integers(2, 8))
def test_ari_equals_pair_count(seed, n):
    rng = np.random.default_rng(seed)
    pred = rng.integers(0, 3, size=n)
    truth = rng.integers(0, 3, size=n)
    if len(set(pred)) in (1, n) and len(set(truth)) in (1, n) and (len(set(pred)) == len(set(truth))):
        return  # 0/0 in the pair-count oracle
    try:
        oracle = pair_count_ari(pred, truth)
    except ZeroDivisionError:
        return
    if np.isfinite(oracle):
        assert ari(pred, truth) == pytest.approx(oracle, rel=1e-10, abs=1e-12)


def test_cluster_embedding_uses_class_count(rng):
    truth = np.repeat([0, 1, 2], 20)
    z = np.eye(3)[truth] * 5 + rng.normal(size=(60, 3)) * 0.1
    out = cluster_embedding(z, truth, seed=0)
    assert set(out) == {"acc", "nmi", "f1", "precision", "ari"}
    assert out["acc"] == 1.0
