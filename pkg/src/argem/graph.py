"""Attributed graphs: citation-file ingestion, GCN propagation matrix, edge splits."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

Propagator = sp.csr_matrix


class DatasetParseError(ValueError):
    """A `.content` / `.cites` line could not be parsed."""

    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


class SplitSizeError(ValueError):
    pass


def _canonical_edges(edges, n: int) -> np.ndarray:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise ValueError(f"edge endpoint out of range for n={n}")
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(e, axis=0)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted graph with dense node features.

    ``edges`` holds each undirected edge once as ``(i, j)`` with ``i < j``,
    sorted lexicographically. Construct through :meth:`from_edges` to get that
    normal form from arbitrary pair lists.
    """

    node_ids: tuple
    edges: np.ndarray
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    label_names: Optional[tuple] = None
    name: str = "graph"

    def __post_init__(self):
        n = len(self.node_ids)
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(f"features must be {n} x m, got {self.features.shape}")
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("labels length differs from node count")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(self.edges[:, 0] >= self.edges[:, 1]):
                raise ValueError("edges must be stored as (i, j) with i < j")

    @classmethod
    def from_edges(cls, n: int, edges, features=None, labels=None, node_ids=None, **kw) -> "Graph":
        if features is None:
            features = np.eye(n)
        if node_ids is None:
            node_ids = tuple(str(i) for i in range(n))
        labels = None if labels is None else np.asarray(labels, dtype=np.int64)
        return cls(
            node_ids=tuple(node_ids),
            edges=_canonical_edges(edges, n),
            features=np.asarray(features, dtype=np.float64),
            labels=labels,
            **kw,
        )

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_classes(self) -> int:
        if self.labels is None:
            raise ValueError(f"{self.name} has no ground-truth labels")
        return int(np.unique(self.labels).size)

    def adjacency(self) -> sp.csr_matrix:
        return adjacency_from_edges(self.n, self.edges)

    def subgraph(self, nodes: Sequence[int]) -> "Graph":
        """Induced subgraph on ``nodes`` (renumbered in the given order)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        e = remap[self.edges]
        e = e[(e >= 0).all(axis=1)]
        return Graph.from_edges(
            len(nodes),
            e,
            features=self.features[nodes],
            labels=None if self.labels is None else self.labels[nodes],
            node_ids=[self.node_ids[i] for i in nodes],
            label_names=self.label_names,
            name=f"{self.name}[sub{len(nodes)}]",
        )


def adjacency_from_edges(n: int, edges) -> sp.csr_matrix:
    """Symmetric binary CSR adjacency with zero diagonal."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    a.sum_duplicates()
    a.data[:] = 1.0
    return a


def _read_lines(path):
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if line.strip():
                yield lineno, line


def load_citation_dataset(content_path: str | PathLike, cites_path: str | PathLike, name: str | None = None) -> Graph:
    """Read a LINQS-style citation dataset.

    ``content_path`` lines are ``node_id<TAB>f_1 ... f_m<TAB>label``; ``cites_path``
    lines are ``cited<TAB>citing``. Citations are symmetrized; duplicates and
    self-citations are dropped, and citations that mention an id missing from
    the content file are skipped with a logged count.
    """
    ids: list[str] = []
    index: dict[str, int] = {}
    rows: list[list[float]] = []
    label_str: list[str] = []
    width = None
    for lineno, line in _read_lines(content_path):
        parts = line.split("\t")
        if width is None:
            if len(parts) < 2:
                raise DatasetParseError(content_path, lineno, "expected node_id, features..., label")
            width = len(parts)
        if len(parts) != width:
            raise DatasetParseError(
                content_path, lineno, f"expected {width} tab-separated fields, got {len(parts)}"
            )
        node_id = parts[0]
        if node_id in index:
            raise DatasetParseError(content_path, lineno, f"duplicate node id {node_id!r}")
        try:
            rows.append([float(v) for v in parts[1:-1]])
        except ValueError as exc:
            raise DatasetParseError(content_path, lineno, f"bad feature value ({exc})") from None
        index[node_id] = len(ids)
        ids.append(node_id)
        label_str.append(parts[-1])

    n = len(ids)
    m = 0 if width is None else width - 2
    features = np.array(rows, dtype=np.float64).reshape(n, m)

    pairs = []
    skipped = 0
    for lineno, line in _read_lines(cites_path):
        parts = line.split("\t")
        if len(parts) != 2:
            parts = line.split()
        if len(parts) != 2:
            raise DatasetParseError(cites_path, lineno, f"expected 2 fields, got {len(parts)}")
        a, b = index.get(parts[0]), index.get(parts[1])
        if a is None or b is None:
            skipped += 1
            continue
        pairs.append((a, b))
    if skipped:
        log.warning("%s: skipped %d citation(s) referencing unknown node ids", cites_path, skipped)

    label_names = tuple(sorted(set(label_str)))
    lookup = {s: k for k, s in enumerate(label_names)}
    labels = np.array([lookup[s] for s in label_str], dtype=np.int64)
    return Graph(
        node_ids=tuple(ids),
        edges=_canonical_edges(pairs, n),
        features=features,
        labels=labels,
        label_names=label_names,
        name=name or Path(content_path).stem,
    )


def build_propagator(g: Graph | sp.spmatrix) -> Propagator:
    """``D^-1/2 (A + I) D^-1/2`` as CSR, with D the degree matrix of ``A + I``."""
    a = g.adjacency() if isinstance(g, Graph) else sp.csr_matrix(g)
    n = a.shape[0]
    a_tilde = (a + sp.identity(n, format="csr")).tocsr()
    a_tilde.sum_duplicates()
    d_inv_sqrt = 1.0 / np.sqrt(np.asarray(a_tilde.sum(axis=1)).ravel())
    coo = a_tilde.tocoo()
    vals = coo.data * d_inv_sqrt[coo.row] * d_inv_sqrt[coo.col]
    p = sp.csr_matrix((vals, (coo.row, coo.col)), shape=(n, n))
    p.sort_indices()
    return p


@dataclass(frozen=True, eq=False)
class EdgeSplit:
    train_edges: np.ndarray
    val_pos: np.ndarray
    val_neg: np.ndarray
    test_pos: np.ndarray
    test_neg: np.ndarray
    seed: int
    extra: dict = field(default_factory=dict)


def _sample_non_edges(n: int, edges: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    total_pairs = n * (n - 1) // 2
    available = total_pairs - len(edges)
    if count > available:
        raise SplitSizeError(
            f"need {count} negative pairs but the graph only has {available} non-edges"
        )
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    edge_keys = np.sort(edges[:, 0] * n + edges[:, 1])

    if available <= 4 * count or total_pairs <= 200_000:
        iu, ju = np.triu_indices(n, k=1)
        keys = iu * n + ju
        pool = keys[~np.isin(keys, edge_keys, assume_unique=True)]
        chosen = rng.choice(pool, size=count, replace=False)
    else:
        chosen = np.zeros(0, dtype=np.int64)
        while len(chosen) < count:
            need = count - len(chosen)
            ij = rng.integers(0, n, size=(2 * need + 16, 2))
            ij = ij[ij[:, 0] != ij[:, 1]]
            ij.sort(axis=1)
            keys = ij[:, 0] * n + ij[:, 1]
            keys = keys[~np.isin(keys, edge_keys)]
            keys = keys[~np.isin(keys, chosen)]
            _, first = np.unique(keys, return_index=True)
            keys = keys[np.sort(first)]
            chosen = np.concatenate([chosen, keys[:need]])
    return np.stack([chosen // n, chosen % n], axis=1).astype(np.int64)


def split_edges(g: Graph, val_frac: float = 0.05, test_frac: float = 0.10, seed: int = 0) -> EdgeSplit:
    """Hold out ``floor(frac * |E|)`` random edges for validation and test.

    Each held-out positive set is paired with the same number of uniformly
    sampled non-edges of the full graph; all negatives are distinct.
    """
    if val_frac < 0 or test_frac < 0 or val_frac + test_frac >= 1:
        raise SplitSizeError(f"need 0 <= val_frac + test_frac < 1, got {val_frac} + {test_frac}")
    n_edges = g.num_edges
    n_test = math.floor(test_frac * n_edges)
    n_val = math.floor(val_frac * n_edges)
    if (test_frac > 0 and n_test == 0) or (val_frac > 0 and n_val == 0):
        raise SplitSizeError(
            f"{n_edges} edges are too few for val_frac={val_frac}, test_frac={test_frac}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_edges)
    edges = g.edges
    test_pos = edges[np.sort(perm[:n_test])]
    val_pos = edges[np.sort(perm[n_test:n_test + n_val])]
    train = edges[np.sort(perm[n_test + n_val:])]
    neg = _sample_non_edges(g.n, edges, n_test + n_val, rng)
    return EdgeSplit(
        train_edges=train,
        val_pos=val_pos,
        val_neg=neg[n_test:],
        test_pos=test_pos,
        test_neg=neg[:n_test],
        seed=seed,
    )
