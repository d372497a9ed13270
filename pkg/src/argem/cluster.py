"""K-means on embeddings and clustering agreement metrics (Acc, NMI, F1, Precision, ARI)."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import comb
from sklearn.cluster import KMeans

from .autodiff import ContractError


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float


def kmeans(z: np.ndarray, k: int, seed: int = 0, max_iter: int = 300, restarts: int = 10) -> ClusterAssignment:
    """Lloyd iterations from k-means++ seeds; best of ``restarts`` by inertia."""
    z = np.asarray(z, dtype=np.float64)
    if not 1 <= k <= z.shape[0]:
        raise ContractError(f"need 1 <= k <= n, got k={k}, n={z.shape[0]}")
    if not np.isfinite(z).all():
        raise ContractError("embedding has non-finite entries")
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, max_iter=max_iter, random_state=seed)
    labels = km.fit_predict(z)
    return ClusterAssignment(labels.astype(np.int64), km.cluster_centers_, float(km.inertia_))


def contingency(pred, truth) -> np.ndarray:
    """Counts ``C[a, b]`` of nodes in predicted cluster ``a`` and true class ``b``."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ContractError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    c = np.zeros((p.max(initial=-1) + 1, t.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(c, (p, t), 1)
    return c


def _alignment(c: np.ndarray):
    """One-to-one cluster/class matching with the most matched nodes.

    Ties between equally good matchings are broken by the larger summed
    per-pair F1, then the larger summed precision, so the choice never depends
    on how the clusters happen to be numbered.
    """
    c = np.asarray(c, dtype=np.float64)
    size_p = c.sum(axis=1, keepdims=True)
    size_t = c.sum(axis=0, keepdims=True)
    f1 = 2.0 * c / (size_p + size_t)
    prec = c / np.maximum(size_p, 1.0)
    scale = min(c.shape) + 1.0  # each tie-break term sums to less than 1
    rows, cols = linear_sum_assignment(c + (f1 + prec / scale) / scale, maximize=True)
    return rows, cols


def clustering_accuracy(pred, truth) -> float:
    """Best fraction of matches over one-to-one relabelings of the clusters."""
    c = contingency(pred, truth)
    rows, cols = _alignment(c)
    return float(c[rows, cols].sum() / c.sum())


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth, average: str = "arithmetic") -> float:
    """Mutual information normalised by the arithmetic (or geometric) mean entropy."""
    c = contingency(pred, truth).astype(np.float64)
    n = c.sum()
    hp, ht = _entropy(c.sum(axis=1)), _entropy(c.sum(axis=0))
    if hp == 0.0 or ht == 0.0:
        warnings.warn("NMI is undefined for a single-cluster labeling; returning 0", RuntimeWarning)
        return 0.0
    pij = c / n
    outer = np.outer(c.sum(axis=1), c.sum(axis=0)) / (n * n)
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / outer[nz])).sum())
    if average == "arithmetic":
        denom = 0.5 * (hp + ht)
    elif average == "geometric":
        denom = np.sqrt(hp * ht)
    else:
        raise ValueError(f"unknown NMI average {average!r}")
    return float(min(max(mi / denom, 0.0), 1.0))


def ari(pred, truth) -> float:
    """Adjusted Rand index from pair counts of the contingency table."""
    c = contingency(pred, truth)
    n = c.sum()
    sum_ij = comb(c, 2).sum()
    sum_a = comb(c.sum(axis=1), 2).sum()
    sum_b = comb(c.sum(axis=0), 2).sum()
    expected = sum_a * sum_b / comb(n, 2) if n > 1 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def f1_and_precision(pred, truth) -> tuple[float, float]:
    """Macro F1 and macro precision over true classes after optimal cluster alignment.

    Clusters left unmatched by the alignment predict no class; a class that no
    cluster maps to gets precision 0.
    """
    c = contingency(pred, truth)
    rows, cols = _alignment(c)
    n_classes = c.shape[1]
    tp = np.zeros(n_classes)
    predicted = np.zeros(n_classes)
    tp[cols] = c[rows, cols]
    predicted[cols] = c[rows].sum(axis=1)
    support = c.sum(axis=0)
    precision = np.divide(tp, predicted, out=np.zeros(n_classes), where=predicted > 0)
    recall = tp / support
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(n_classes), where=denom > 0)
    return float(f1.mean()), float(precision.mean())


def clustering_scores(pred, truth, nmi_average: str = "arithmetic") -> dict:
    f1, prec = f1_and_precision(pred, truth)
    return {
        "acc": clustering_accuracy(pred, truth),
        "nmi": nmi(pred, truth, nmi_average),
        "f1": f1,
        "precision": prec,
        "ari": ari(pred, truth),
    }


def cluster_embedding(z, truth, seed: int = 0, k: int | None = None, restarts: int = 10,
                      max_iter: int = 300, nmi_average: str = "arithmetic") -> dict:
    """K-means with ``k`` = number of true classes, scored against ``truth``."""
    truth = np.asarray(truth)
    k = int(np.unique(truth).size) if k is None else k
    assignment = kmeans(z, k, seed=seed, max_iter=max_iter, restarts=restarts)
    return clustering_scores(assignment.labels, truth, nmi_average)
