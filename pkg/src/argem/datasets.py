"""Dataset lookup and a synthetic citation-like graph generator."""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .graph import Graph, load_citation_dataset

DATA_ENV = "ARGEM_DATA_DIR"
KNOWN = ("cora", "citeseer", "pubmed")


class DatasetNotFound(FileNotFoundError):
    pass


def data_dir(override=None) -> Path:
    return Path(override or os.environ.get(DATA_ENV) or "data")


def dataset_paths(spec: str, root=None) -> tuple[Path, Path]:
    """Resolve ``spec`` to ``(content, cites)`` paths.

    ``spec`` is either a known name (looked up as ``<root>/<name>/<name>.content``
    or ``<root>/<name>.content``), a ``CONTENT,CITES`` pair, or a path prefix
    to which ``.content`` / ``.cites`` are appended.
    """
    if "," in spec:
        content, cites = (Path(s.strip()) for s in spec.split(",", 1))
        candidates = [(content, cites)]
    elif spec.lower() in KNOWN:
        root = data_dir(root)
        name = spec.lower()
        candidates = [
            (root / name / f"{name}.content", root / name / f"{name}.cites"),
            (root / f"{name}.content", root / f"{name}.cites"),
        ]
    else:
        prefix = Path(spec)
        candidates = [(prefix.with_name(prefix.name + ".content"), prefix.with_name(prefix.name + ".cites"))]
    for content, cites in candidates:
        if content.is_file() and cites.is_file():
            return content, cites
    tried = ", ".join(f"{a} + {b}" for a, b in candidates)
    raise DatasetNotFound(f"dataset {spec!r} not found (tried {tried}; set {DATA_ENV})")


def load_dataset(spec: str, root=None) -> Graph:
    content, cites = dataset_paths(spec, root)
    name = spec.lower() if spec.lower() in KNOWN else content.stem
    return load_citation_dataset(content, cites, name=name)


def dataset_available(spec: str, root=None) -> bool:
    try:
        dataset_paths(spec, root)
    except DatasetNotFound:
        return False
    return True


def synthetic_citation_graph(
    n: int = 600,
    k: int = 4,
    m: int = 200,
    avg_degree: float = 4.0,
    homophily: float = 0.85,
    words_per_node: int = 12,
    topic_words: float = 0.6,
    seed: int = 0,
) -> Graph:
    """Planted-partition graph with class-correlated binary bag-of-words features.

    Each node gets a class; edge endpoints share a class with probability
    ``homophily``. Every class owns a block of ``m // k`` vocabulary words and a
    node draws a ``topic_words`` fraction of its words from its class block,
    the rest uniformly from the whole vocabulary.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, k, size=n)
    members = [np.flatnonzero(labels == c) for c in range(k)]
    target = int(round(n * avg_degree / 2))
    pairs = set()
    while len(pairs) < target:
        i = int(rng.integers(n))
        if rng.random() < homophily:
            pool = members[labels[i]]
            j = int(pool[rng.integers(len(pool))])
        else:
            j = int(rng.integers(n))
        if i != j:
            pairs.add((min(i, j), max(i, j)))
    block = max(1, m // k)
    x = np.zeros((n, m))
    for i in range(n):
        n_topic = rng.binomial(words_per_node, topic_words)
        start = labels[i] * block
        x[i, rng.choice(np.arange(start, min(start + block, m)), size=min(n_topic, block), replace=False)] = 1.0
        x[i, rng.choice(m, size=words_per_node - n_topic, replace=False)] = 1.0
    return Graph.from_edges(
        n, sorted(pairs), features=x, labels=labels,
        node_ids=[f"p{i}" for i in range(n)],
        label_names=tuple(f"class{c}" for c in range(k)),
        name=f"synthetic-{n}",
    )


def write_citation_files(g: Graph, prefix) -> tuple[Path, Path]:
    """Write ``g`` as ``<prefix>.content`` / ``<prefix>.cites`` (LINQS layout)."""
    prefix = Path(prefix)
    content = prefix.with_name(prefix.name + ".content")
    cites = prefix.with_name(prefix.name + ".cites")
    names = g.label_names or tuple(str(c) for c in range(int(g.labels.max()) + 1)) if g.labels is not None else None
    with open(content, "w") as fh:
        for i, node in enumerate(g.node_ids):
            feats = "\t".join(str(int(v)) if float(v).is_integer() else repr(float(v)) for v in g.features[i])
            label = names[g.labels[i]] if names is not None else "none"
            fh.write(f"{node}\t{feats}\t{label}\n")
    with open(cites, "w") as fh:
        for i, j in g.edges:
            fh.write(f"{g.node_ids[j]}\t{g.node_ids[i]}\n")
    return content, cites
