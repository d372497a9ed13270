import numpy as np
import pytest

from argem.datasets import (
    DatasetNotFound,
    dataset_available,
    dataset_paths,
    load_dataset,
    synthetic_citation_graph,
    write_citation_files,
)


@pytest.fixture
def tree(tmp_path):
    g = synthetic_citation_graph(n=30, k=2, m=8, words_per_node=3, seed=0)
    (tmp_path / "cora").mkdir()
    write_citation_files(g, tmp_path / "cora" / "cora")
    write_citation_files(g, tmp_path / "citeseer")
    return tmp_path, g


def test_known_name_layouts(tree):
    root, g = tree
    assert dataset_paths("cora", root)[0] == root / "cora" / "cora.content"
    assert dataset_paths("CiteSeer", root)[0] == root / "citeseer.content"
    h = load_dataset("cora", root)
    assert h.name == "cora" and h.n == g.n


def test_env_var_root(tree, monkeypatch):
    root, _ = tree
    monkeypatch.setenv("ARGEM_DATA_DIR", str(root))
    assert dataset_available("cora") and not dataset_available("pubmed")


def test_pair_and_prefix_specs(tree):
    root, g = tree
    pair = f"{root / 'citeseer.content'},{root / 'citeseer.cites'}"
    assert load_dataset(pair).n == g.n
    assert load_dataset(str(root / "citeseer")).n == g.n


def test_missing_dataset_message(tmp_path):
    with pytest.raises(DatasetNotFound, match="ARGEM_DATA_DIR"):
        dataset_paths("pubmed", tmp_path)


def test_synthetic_graph_shape_and_homophily():
    g = synthetic_citation_graph(n=500, k=5, m=100, avg_degree=4, homophily=0.9, seed=1)
    assert g.n == 500 and g.m == 100 and g.num_classes == 5
    assert g.num_edges == 1000
    same = np.mean(g.labels[g.edges[:, 0]] == g.labels[g.edges[:, 1]])
    assert same > 0.8
    assert set(np.unique(g.features)) <= {0.0, 1.0}
    a = synthetic_citation_graph(n=50, seed=3)
    b = synthetic_citation_graph(n=50, seed=3)
    assert np.array_equal(a.edges, b.edges) and np.array_equal(a.features, b.features)
