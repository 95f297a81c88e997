"""Acceptance gate: one PASS / FAIL / BLOCKED line per criterion.

The lines are printed in the terminal summary (see conftest.py).  Criteria
that need the Cora and Citeseer distribution files look for them under the
directory named by ``HGCLUSTER_DATA`` (default ``<repo>/data``), either as
``cora.content`` or ``cora/cora.content``.  When the files are missing those
criteria are reported as BLOCKED and the tests are skipped, never passed.
"""

import itertools
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from hgcluster.cli import main
from hgcluster.datasets import Dataset, load_dataset
from hgcluster.graphs import Hypergraph, graph_operator, hypergraph_operator
from hgcluster.kmeans import kmeans
from hgcluster.metrics import calinski_harabasz, davies_bouldin, silhouette
from hgcluster.pipeline import RunConfig, compare, embed, summarize
from hgcluster.spectral import spectral_clustering

from conftest import ACCEPTANCE
from linqs import write_corpus
from oracles import (
    calinski_harabasz_bruteforce,
    davies_bouldin_bruteforce,
    graph_operator_dense,
    hypergraph_operator_dense,
    silhouette_bruteforce,
)
from test_autoencoder import check_gradients, fd_instance

DATA_DIR = Path(os.environ.get("HGCLUSTER_DATA", Path(__file__).resolve().parents[1] / "data"))
SEEDS = [1, 2, 3, 4, 5]

# every loss history produced by an acceptance run, checked by criterion 9
LOSS_HISTORIES: list[tuple[str, list[float]]] = []


def record(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE[num] = (status, detail)
    return ok


def blocked(num, detail):
    ACCEPTANCE[num] = ("BLOCKED", detail)
    pytest.skip(f"BLOCKED: {detail}")


def dataset_files(name):
    for base in (DATA_DIR, DATA_DIR / name):
        content, cites = base / f"{name}.content", base / f"{name}.cites"
        if content.is_file() and cites.is_file():
            return content, cites
    return None


# ---------------------------------------------------------------- 1, 2: ordinal reproduction


def ordinal_run(num, name, k, check_ch):
    files = dataset_files(name)
    if files is None:
        blocked(num, f"{name}.content/{name}.cites not found under {DATA_DIR}")
    ds = load_dataset(*files)
    start = time.perf_counter()
    results = compare(ds, RunConfig(k_clusters=k), SEEDS, methods=["hgcn", "gcn", "kmeans"])
    elapsed = time.perf_counter() - start
    for method in ("hgcn", "gcn"):
        for run in results[method]:
            LOSS_HISTORIES.append((f"{name}/{method}", run.embedding.loss_history))
    rows = {r["method"]: r for r in summarize(results)}
    s = {m: rows[m]["silhouette"] for m in rows}
    db = {m: rows[m]["davies_bouldin"] for m in rows}
    ch = {m: rows[m]["calinski_harabasz"] for m in rows}
    ok = s["hgcn"] > s["gcn"] > s["kmeans"] and db["hgcn"] < db["gcn"] < db["kmeans"]
    detail = (
        f"{name} mean over seeds {SEEDS}: silhouette hgcn={s['hgcn']:.4f} gcn={s['gcn']:.4f} "
        f"kmeans={s['kmeans']:.4f}; DB hgcn={db['hgcn']:.4f} gcn={db['gcn']:.4f} "
        f"kmeans={db['kmeans']:.4f}"
    )
    if check_ch:
        ok = ok and ch["hgcn"] > ch["gcn"]
        detail += f"; CH hgcn={ch['hgcn']:.2f} gcn={ch['gcn']:.2f}"
    detail += f"; {elapsed:.0f} s"
    return record(num, ok, detail)


@pytest.mark.dataset
def test_criterion_1_citeseer_ordering():
    assert ordinal_run(1, "citeseer", 6, check_ch=False), ACCEPTANCE[1][1]


@pytest.mark.dataset
def test_criterion_2_cora_ordering():
    assert ordinal_run(2, "cora", 7, check_ch=True), ACCEPTANCE[2][1]


# ---------------------------------------------------------------- 3: gradient oracle


def test_criterion_3_gradient_oracle():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        worst = max(worst, *check_gradients(*fd_instance(seed)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed <= 10.0
    assert record(3, ok, f"20 instances, worst relative error {worst:.2e} (< 1e-4), {elapsed:.2f} s (<= 10 s)")


# ---------------------------------------------------------------- 4: metric oracles


def test_criterion_4_metric_oracles():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(2, 7))
        n = int(rng.integers(k + 1, 201))
        X = rng.normal(size=(n, int(rng.integers(1, 6)))) * rng.uniform(0.5, 5)
        labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
        rng.shuffle(labels)
        worst = max(
            worst,
            abs(silhouette(X, labels) - silhouette_bruteforce(X, labels)),
            abs(davies_bouldin(X, labels) - davies_bouldin_bruteforce(X, labels)),
            abs(calinski_harabasz(X, labels) - calinski_harabasz_bruteforce(X, labels)),
        )
    ch = calinski_harabasz(np.array([[0.0], [1.0], [10.0], [11.0]]), [0, 0, 1, 1])
    db = davies_bouldin(np.array([[0.0], [2.0], [10.0], [12.0]]), [0, 0, 1, 1])
    ok = worst <= 1e-9 and abs(ch - 200.0) <= 1e-9 and abs(db - 0.2) <= 1e-12
    assert record(4, ok, f"50 instances, worst |diff| {worst:.1e} (<= 1e-9); CH anchor {ch:.12g}, DB anchor {db:.12g}")


# ---------------------------------------------------------------- 5: operators


def test_criterion_5_operators():
    rng = np.random.default_rng(77)
    worst = 0.0
    ev_lo, ev_hi = np.inf, -np.inf
    for _ in range(20):
        n = int(rng.integers(2, 25))
        A = np.triu((rng.random((n, n)) < 0.3).astype(float), 1)
        A = A + A.T
        worst = max(worst, np.abs(graph_operator(sp.csr_array(A)).toarray() - graph_operator_dense(A)).max())
        m = int(rng.integers(1, 15))
        H = (rng.random((n, m)) < 0.3).astype(float)
        H[rng.integers(n, size=m), np.arange(m)] = 1.0
        H[np.arange(n), rng.integers(m, size=n)] = 1.0
        w = rng.uniform(0.2, 3.0, size=m)
        theta = hypergraph_operator(Hypergraph(sp.csr_array(H), w)).toarray()
        worst = max(worst, np.abs(theta - hypergraph_operator_dense(H, w)).max())
        ev = np.linalg.eigvalsh(theta)
        ev_lo, ev_hi = min(ev_lo, ev.min()), max(ev_hi, ev.max())
    anchor = hypergraph_operator(Hypergraph(sp.csr_array(np.ones((2, 1))))).toarray()
    anchor_ok = np.abs(anchor - 0.5).max() <= 1e-12
    ok = worst <= 1e-12 and ev_lo >= -1e-10 and ev_hi <= 1 + 1e-10 and anchor_ok
    assert record(
        5, ok,
        f"20 instances, worst |diff| {worst:.1e} (<= 1e-12); hypergraph eigenvalues in "
        f"[{ev_lo:.2e}, {ev_hi:.12f}]; 2-vertex anchor {'ok' if anchor_ok else 'wrong'}",
    )


# ---------------------------------------------------------------- 6: end-to-end sanity


def two_cliques():
    block = np.ones((10, 10)) - np.eye(10)
    A = sp.block_diag([block, block]).toarray()
    edges = np.array([(i, j) for i, j in itertools.combinations(range(20), 2) if A[i, j]])
    return Dataset(
        ids=[str(i) for i in range(20)], X=np.eye(20), labels=["a"] * 10 + ["b"] * 10,
        cite_edges=edges, name="two-cliques",
    )


def test_criterion_6_two_cliques():
    ds = two_cliques()
    truth = np.repeat([0, 1], 10)
    start = time.perf_counter()
    hits = {"hgcn": 0, "gcn": 0, "spectral-adjacency": 0}
    for seed in range(1, 11):
        # identity features make every KNN distance tie, so both encoders use the clique graph
        cfg = RunConfig(k_clusters=2, seed=seed, gcn_structure="citations", hgcn_structure="citations")
        for method in ("hgcn", "gcn"):
            emb = embed(ds, method, cfg)
            LOSS_HISTORIES.append((f"two-cliques/{method}", emb.loss_history))
            labels = kmeans(emb.rows, 2, seed=seed).labels
            hits[method] += np.array_equal(labels, truth)
        hits["spectral-adjacency"] += np.array_equal(
            spectral_clustering(ds.adjacency(), 2, seed=seed).labels, truth
        )
    elapsed = time.perf_counter() - start
    ok = all(h >= 9 for h in hits.values()) and elapsed <= 30.0
    detail = ", ".join(f"{m} {h}/10" for m, h in hits.items())
    assert record(6, ok, f"{detail} (each >= 9); {elapsed:.1f} s (<= 30 s)")


# ---------------------------------------------------------------- 7: ingestion


@pytest.mark.dataset
def test_criterion_7_ingestion():
    expected = {"cora": (2708, 1433, 7, 5429), "citeseer": (3312, 3703, 6, 4732)}
    missing = [name for name in expected if dataset_files(name) is None]
    if missing:
        blocked(7, f"{', '.join(missing)} files not found under {DATA_DIR}")
    parts, ok = [], True
    for name, want in expected.items():
        ds = load_dataset(*dataset_files(name))
        got = (ds.n, ds.X.shape[1], len(ds.classes), ds.citations.n_lines)
        ok = ok and got == want
        parts.append(
            f"{name} n={got[0]} L1={got[1]} classes={got[2]} cites={got[3]} "
            f"(undirected {len(ds.cite_edges)}, dangling {ds.citations.n_dangling})"
        )
    assert record(7, ok, "; ".join(parts)), ACCEPTANCE[7][1]


# ---------------------------------------------------------------- 8: determinism


def test_criterion_8_determinism(tmp_path):
    content, cites = write_corpus(tmp_path, n_per_class=(15, 15, 15), n_words=30, seed=8)
    real = dataset_files("cora")
    identical = []
    for method in ("hgcn", "gcn", "kmeans", "spectral-features", "spectral-adjacency"):
        outs = []
        for rep in range(2):
            out = tmp_path / f"{method}-{rep}.json"
            rc = main(["cluster", "--method", method, "--content", str(content), "--cites", str(cites),
                       "--seed", "3", "--threads", "1", "--epochs", "60", "--output", str(out)])
            assert rc == 0
            payload = json.loads(out.read_text())
            if payload.get("loss_history"):
                LOSS_HISTORIES.append((f"determinism/{method}", payload["loss_history"]))
            outs.append([ln for ln in out.read_bytes().splitlines() if b'"runtime_ms"' not in ln])
        identical.append(outs[0] == outs[1])
    detail = f"{sum(identical)}/5 methods byte-identical (modulo runtime_ms) on a synthetic LINQS corpus"
    if real is None:
        detail += "; real datasets unavailable, not repeated on them"
    assert record(8, all(identical), detail)


# ---------------------------------------------------------------- 9: k-means and loss descent


def test_criterion_9_descent():
    rng = np.random.default_rng(99)
    monotone = 0
    for seed in range(100):
        n = int(rng.integers(4, 60))
        k = int(rng.integers(1, min(n, 8) + 1))
        X = rng.normal(size=(n, int(rng.integers(1, 6)))) * rng.uniform(0.1, 10)
        h = np.array(kmeans(X, k, seed=seed, n_init=3).inertia_history)
        monotone += bool(np.all(np.diff(h) <= 1e-12 * max(1.0, h[0])))
    descended = [lh[-1] < lh[0] for _, lh in LOSS_HISTORIES]
    sources = sorted({name.split("/")[0] for name, _ in LOSS_HISTORIES})
    ok = monotone == 100 and len(descended) > 0 and all(descended)
    assert record(
        9, ok,
        f"inertia non-increasing on {monotone}/100 instances; loss fell on "
        f"{sum(descended)}/{len(descended)} acceptance training runs ({', '.join(sources)})",
    )
