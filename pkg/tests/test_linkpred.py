import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from argem.autodiff import ContractError
from argem.linkpred import auc, auc_pairwise, average_precision, link_prediction_scores, score_edges

seeds = st.integers(0, 2**32 - 1)


def random_scores(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 60, size=2)
    # coarse grid so ties are common
    levels = rng.choice([3, 10, 1000])
    return rng.integers(0, levels, size=n) / levels, rng.integers(0, levels, size=m) / levels


def test_score_edges_examples():
    np.testing.assert_array_equal(score_edges(np.zeros((3, 2)), [(0, 1), (1, 2)]), [0.5, 0.5])
    z = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert score_edges(z, [(0, 1)])[0] == pytest.approx(1 / (1 + math.exp(-2)), rel=1e-15)
    assert round(float(score_edges(z, [(0, 1)])[0]), 4) == 0.8808


def test_score_edges_matches_loop(rng):
    z = rng.normal(size=(6, 3))
    pairs = [(0, 5), (2, 3), (4, 4)]
    got = score_edges(z, pairs)
    for s, (i, j) in zip(got, pairs):
        assert s == pytest.approx(1 / (1 + math.exp(-float(z[i] @ z[j]))), rel=1e-14)
        assert 0 < s < 1


def test_score_edges_index_error():
    with pytest.raises(IndexError):
        score_edges(np.zeros((3, 2)), [(0, 3)])


@pytest.mark.parametrize("pos,neg,expected", [
    ([0.9, 0.8], [0.1], 1.0),
    ([0.9, 0.4], [0.5], 0.5),
    ([0.5], [0.5], 0.5),
])
def test_auc_examples(pos, neg, expected):
    assert auc(pos, neg) == expected
    assert auc_pairwise(pos, neg) == expected


def test_auc_needs_both_sides():
    with pytest.raises(ContractError):
        auc([], [0.1])
    with pytest.raises(ContractError):
        auc_pairwise([0.3], [])


@settings(max_examples=1000)
@given(seeds)
def test_auc_rank_equals_pairwise(seed):
    pos, neg = random_scores(seed)
    assert auc(pos, neg) == auc_pairwise(pos, neg)


@given(seeds)
def test_auc_monotone_invariance_and_complement(seed):
    pos, neg = random_scores(seed)
    cube = lambda x: (x - 0.3) ** 3
    assert auc(cube(pos), cube(neg)) == auc(pos, neg)
    assert auc(pos, neg) + auc(neg, pos) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("scores,labels,expected", [
    ([0.9, 0.8, 0.1], [1, 1, 0], 1.0),
    ([0.9, 0.8, 0.7], [1, 0, 1], (1 / 1 + 2 / 3) / 2),
    ([0.9, 0.8, 0.7, 0.1], [0, 0, 0, 1], 0.25),
])
def test_average_precision_examples(scores, labels, expected):
    assert average_precision(scores, labels) == pytest.approx(expected, rel=1e-15)


def test_average_precision_ties_keep_input_order():
    assert average_precision([0.5, 0.5], [1, 0]) == 1.0
    assert average_precision([0.5, 0.5], [0, 1]) == 0.5


def test_average_precision_errors():
    with pytest.raises(ContractError):
        average_precision([0.1, 0.2], [0, 0])
    with pytest.raises(ContractError):
        average_precision([0.1], [1, 0])


@given(seeds)
def test_average_precision_bounds(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    labels = rng.random(n) < 0.4
    labels[0] = True
    perfect = np.where(labels, 2.0, 1.0) + rng.random(n) * 0.5
    reverse = -perfect
    assert average_precision(perfect, labels) == 1.0 >= labels.mean()
    assert average_precision(reverse, labels) <= average_precision(perfect, labels)
    assert 0 < average_precision(rng.random(n), labels) <= 1


def _ap_loop(scores, labels):
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    hits, total = 0, 0.0
    for k, i in enumerate(order, 1):
        if labels[i]:
            hits += 1
            total += hits / k
    return total / hits


@given(seeds)
def test_average_precision_matches_rank_walk(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    s = rng.random(n)
    y = rng.random(n) < 0.5
    y[-1] = True
    assert average_precision(s, y) == pytest.approx(_ap_loop(list(s), list(y)), rel=1e-14)


def test_link_prediction_scores_fields(rng):
    z = rng.normal(size=(10, 2))
    out = link_prediction_scores(z, [(0, 1), (2, 3)], [(4, 5), (6, 7)])
    assert set(out) == {"auc", "ap"}
    assert 0 <= out["auc"] <= 1 and 0 < out["ap"] <= 1
