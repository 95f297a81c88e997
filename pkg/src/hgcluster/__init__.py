"""Graph and hypergraph convolutional autoencoder clustering."""

__version__ = "0.1.0"

from .autoencoder import EncoderParams, TrainConfig, TrainResult, decode, encode, train
from .datasets import Dataset, load_cites, load_content, load_dataset
from .graphs import (
    Hypergraph,
    KnnConfig,
    graph_operator,
    hypergraph_operator,
    knn_graph,
    knn_hypergraph,
)
from .kmeans import ClusterAssignment, kmeans
from .metrics import MetricsReport, calinski_harabasz, davies_bouldin, evaluate, silhouette
from .pipeline import METHODS, RunConfig, run_method
from .spectral import spectral_clustering

__all__ = [
    "ClusterAssignment",
    "Dataset",
    "EncoderParams",
    "Hypergraph",
    "KnnConfig",
    "METHODS",
    "MetricsReport",
    "RunConfig",
    "TrainConfig",
    "TrainResult",
    "calinski_harabasz",
    "davies_bouldin",
    "decode",
    "encode",
    "evaluate",
    "graph_operator",
    "hypergraph_operator",
    "kmeans",
    "knn_graph",
    "knn_hypergraph",
    "load_cites",
    "load_content",
    "load_dataset",
    "run_method",
    "silhouette",
    "spectral_clustering",
    "train",
]
