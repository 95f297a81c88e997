"""End-to-end clustering pipelines and multi-seed comparison."""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .autoencoder import TrainConfig, resolve_pos_weight, train
from .datasets import Dataset
from .graphs import (
    KnnConfig,
    graph_operator,
    hypergraph_from_adjacency,
    hypergraph_operator,
    knn_graph,
)
from .kmeans import ClusterAssignment, kmeans
from .metrics import MetricsReport, evaluate
from .spectral import spectral_embedding

__all__ = [
    "METHODS",
    "CNN_METHODS",
    "METHOD_TITLES",
    "RunConfig",
    "Embedding",
    "RunResult",
    "embed",
    "run_method",
    "compare",
    "summarize",
]

METHODS = ("hgcn", "gcn", "kmeans", "spectral-features", "spectral-adjacency")
CNN_METHODS = ("hgcn", "gcn")
METHOD_TITLES = {
    "hgcn": "hypergraph CNN + k-means",
    "gcn": "graph CNN + k-means",
    "kmeans": "k-means on features",
    "spectral-features": "spectral clustering (feature KNN graph)",
    "spectral-adjacency": "spectral clustering (citation graph)",
}
STRUCTURES = ("auto", "knn", "citations")


@dataclass(frozen=True)
class RunConfig:
    k_clusters: int
    seed: int = 1
    knn: KnnConfig = KnnConfig()
    train: TrainConfig = TrainConfig()
    # graph used by gcn: citations when available ("auto"), or forced
    gcn_structure: str = "auto"
    # neighbour relation whose closed neighbourhoods form the hgcn hyperedges
    hgcn_structure: str = "knn"
    kmeans_n_init: int = 10
    kmeans_max_iter: int = 300

    def __post_init__(self):
        if self.k_clusters < 1:
            raise ValueError("k_clusters must be >= 1")
        if self.gcn_structure not in STRUCTURES:
            raise ValueError(f"gcn_structure must be one of {STRUCTURES}")
        if self.hgcn_structure not in STRUCTURES:
            raise ValueError(f"hgcn_structure must be one of {STRUCTURES}")


@dataclass
class Embedding:
    """Representation handed to k-means, with its provenance."""

    rows: np.ndarray
    structure: str | None = None
    loss_history: list[float] | None = None
    pos_weight: float | None = None


@dataclass
class RunResult:
    method: str
    assignment: ClusterAssignment
    embedding: Embedding
    metrics: MetricsReport
    runtime_ms: float = 0.0
    extra: dict = field(default_factory=dict)


def _structure(ds: Dataset, cfg: RunConfig, choice: str, auto: str) -> tuple[str, sp.csr_array]:
    if choice == "auto":
        choice = "citations" if ds.cite_edges is not None else auto
    if choice == "citations":
        return choice, ds.adjacency()
    return choice, knn_graph(ds.X, cfg.knn.k, cfg.knn.metric)


def embed(ds: Dataset, method: str, cfg: RunConfig) -> Embedding:
    """Build the representation each method clusters (before k-means)."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    train_cfg = dataclasses.replace(cfg.train, seed=cfg.seed)

    if method == "hgcn":
        structure, A = _structure(ds, cfg, cfg.hgcn_structure, "knn")
        hg = hypergraph_from_adjacency(A)
        P = hypergraph_operator(hg)
        T = hg.incidence
    elif method == "gcn":
        structure, A = _structure(ds, cfg, cfg.gcn_structure, "knn")
        P = graph_operator(A)
        T = A + sp.eye_array(A.shape[0], format="csr")
    elif method == "kmeans":
        return Embedding(rows=ds.X, structure="features")
    elif method == "spectral-features":
        A = knn_graph(ds.X, cfg.knn.k, cfg.knn.metric)
        return Embedding(rows=spectral_embedding(A, cfg.k_clusters, cfg.seed), structure="knn")
    else:
        return Embedding(
            rows=spectral_embedding(ds.adjacency(), cfg.k_clusters, cfg.seed),
            structure="citations",
        )

    result = train(P, ds.X, T, train_cfg)
    return Embedding(
        rows=result.embedding,
        structure=structure,
        loss_history=result.loss_history,
        pos_weight=resolve_pos_weight(T, train_cfg.pos_weight),
    )


def run_method(ds: Dataset, method: str, cfg: RunConfig) -> RunResult:
    """Embed, cluster with k-means and score one method on one dataset."""
    start = time.perf_counter()
    emb = embed(ds, method, cfg)
    assignment = kmeans(
        emb.rows,
        cfg.k_clusters,
        seed=cfg.seed,
        max_iter=cfg.kmeans_max_iter,
        n_init=cfg.kmeans_n_init,
    )
    report = evaluate(emb.rows, assignment.labels)
    elapsed = (time.perf_counter() - start) * 1000.0
    return RunResult(method, assignment, emb, report, runtime_ms=elapsed)


def compare(ds: Dataset, cfg: RunConfig, seeds, methods=None) -> dict[str, list[RunResult]]:
    """Run every method for every seed.  Methods needing citations are skipped without them."""
    if methods is None:
        methods = [m for m in METHODS if m != "spectral-adjacency" or ds.cite_edges is not None]
    results = {}
    for method in methods:
        results[method] = [
            run_method(ds, method, dataclasses.replace(cfg, seed=int(s))) for s in seeds
        ]
    return results


def summarize(results: dict[str, list[RunResult]]) -> list[dict]:
    """Mean (and population std) of each metric per method, in method order."""
    rows = []
    for method, runs in results.items():
        row = {"method": method, "structure": runs[0].embedding.structure, "runs": len(runs)}
        for name in ("silhouette", "davies_bouldin", "calinski_harabasz"):
            vals = np.array([getattr(r.metrics, name) for r in runs])
            row[name] = float(vals.mean())
            row[f"{name}_std"] = float(vals.std())
        rows.append(row)
    return rows
