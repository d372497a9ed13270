"""Held-out edge scoring, ROC AUC and average precision."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .autodiff import ContractError, stable_sigmoid


def score_edges(z: np.ndarray, pairs) -> np.ndarray:
    """``sigmoid(z_i . z_j)`` for every pair ``(i, j)``."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= z.shape[0]):
        raise IndexError(f"pair index out of range for {z.shape[0]} nodes")
    return stable_sigmoid(np.einsum("ij,ij->i", z[pairs[:, 0]], z[pairs[:, 1]]))


def _check_sides(pos, neg):
    pos = np.asarray(pos, dtype=np.float64).ravel()
    neg = np.asarray(neg, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ContractError("AUC needs at least one positive and one negative score")
    return pos, neg


def auc_pairwise(pos, neg) -> float:
    """Fraction of (positive, negative) pairs ranked correctly; ties count one half."""
    pos, neg = _check_sides(pos, neg)
    wins = 0.0
    ties = 0.0
    for chunk in np.array_split(pos, max(1, pos.size // 2048)):
        wins += np.count_nonzero(chunk[:, None] > neg[None, :])
        ties += np.count_nonzero(chunk[:, None] == neg[None, :])
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def auc(pos, neg) -> float:
    """Mann-Whitney form of the same quantity as :func:`auc_pairwise`, in O((N+M) log(N+M))."""
    pos, neg = _check_sides(pos, neg)
    ranks = rankdata(np.concatenate([pos, neg]))  # average ranks for ties
    n = pos.size
    u = ranks[:n].sum() - n * (n + 1) / 2.0
    return u / (n * neg.size)


def average_precision(scores, labels) -> float:
    """Mean of precision@k over the ranks k of the positives.

    Items are ranked by descending score; equal scores keep their input order.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise ContractError("scores and labels differ in length")
    if not labels.any():
        raise ContractError("average precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, ranks.size + 1) / ranks))


def link_prediction_scores(z: np.ndarray, pos_pairs, neg_pairs) -> dict:
    pos = score_edges(z, pos_pairs)
    neg = score_edges(z, neg_pairs)
    labels = np.r_[np.ones(pos.size), np.zeros(neg.size)]
    return {"auc": float(auc(pos, neg)), "ap": average_precision(np.r_[pos, neg], labels)}
