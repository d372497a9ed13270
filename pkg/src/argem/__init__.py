"""Adversarially regularized graph autoencoders on numpy/scipy."""
from .graph import EdgeSplit, Graph, build_propagator, load_citation_dataset, split_edges
from .linkpred import auc, average_precision, link_prediction_scores
from .cluster import cluster_embedding, clustering_scores, kmeans
from .train import TrainConfig, TrainedModel, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "EdgeSplit", "Graph", "build_propagator", "load_citation_dataset", "split_edges",
    "auc", "average_precision", "link_prediction_scores",
    "cluster_embedding", "clustering_scores", "kmeans",
    "TrainConfig", "TrainedModel", "load_checkpoint", "save_checkpoint", "train",
]
