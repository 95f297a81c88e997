import numpy as np
import pytest
import scipy.sparse as sp

from hgcluster.graphs import (
    Hypergraph,
    KnnConfig,
    graph_operator,
    hypergraph_operator,
    knn_graph,
    knn_hypergraph,
    knn_neighbors,
)

from oracles import (
    graph_operator_dense,
    hypergraph_operator_dense,
    knn_adjacency_bruteforce,
    knn_incidence_bruteforce,
)

LINE = np.array([[0.0], [1.0], [10.0]])


def edges(A):
    coo = sp.coo_array(sp.triu(A, 1))
    return sorted(zip(coo.row.tolist(), coo.col.tolist()))


def test_knn_graph_line():
    A = knn_graph(LINE, k=1)
    assert edges(A) == [(0, 1), (1, 2)]
    assert (A != A.T).nnz == 0
    assert A.diagonal().sum() == 0


def test_knn_graph_two_points():
    assert edges(knn_graph([[0.0], [3.0]], k=1)) == [(0, 1)]


def test_knn_rejects_large_k():
    with pytest.raises(ValueError, match="smaller than"):
        knn_graph(LINE, k=3)
    with pytest.raises(ValueError):
        KnnConfig(k=2, metric="manhattan")


def test_knn_ties_break_to_lower_index():
    # every pair is at the same distance
    nbrs = knn_neighbors(np.eye(5), k=2)
    np.testing.assert_array_equal(nbrs, [[1, 2], [0, 2], [0, 1], [0, 1], [0, 1]])


def test_knn_duplicates_allowed():
    X = np.array([[0.0], [0.0], [0.0], [5.0]])
    np.testing.assert_array_equal(knn_neighbors(X, 1)[:, 0], [1, 0, 0, 0])


@pytest.mark.parametrize("metric", ["euclidean", "cosine"])
@pytest.mark.parametrize("seed", range(3))
def test_knn_graph_matches_bruteforce(metric, seed):
    X = np.random.default_rng(seed).normal(size=(25, 4))
    A = knn_graph(X, k=3, metric=metric)
    np.testing.assert_array_equal(A.toarray(), knn_adjacency_bruteforce(X, 3, metric))
    assert A.sum(axis=1).min() >= 3


def test_knn_graph_binary_features_match_bruteforce():
    X = (np.random.default_rng(11).random((40, 12)) < 0.3).astype(float)
    np.testing.assert_array_equal(knn_graph(X, 5).toarray(), knn_adjacency_bruteforce(X, 5))


def test_knn_graph_permutation_equivariant():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 3))
    perm = rng.permutation(30)
    A = knn_graph(X, 4).toarray()
    Ap = knn_graph(X[perm], 4).toarray()
    np.testing.assert_array_equal(Ap, A[np.ix_(perm, perm)])


def test_knn_hypergraph_line():
    H = knn_hypergraph(LINE, k=1).incidence.toarray()
    members = [sorted(np.flatnonzero(H[:, j]).tolist()) for j in range(3)]
    assert members == [[0, 1], [0, 1, 2], [1, 2]]


def test_knn_hypergraph_two_points():
    hg = knn_hypergraph([[0.0], [1.0]], k=1)
    np.testing.assert_array_equal(hg.incidence.toarray(), np.ones((2, 2)))
    np.testing.assert_array_equal(hg.edge_weights, [1.0, 1.0])


def test_knn_hypergraph_matches_bruteforce():
    X = np.random.default_rng(3).normal(size=(20, 4))
    H = knn_hypergraph(X, k=3).incidence.toarray()
    np.testing.assert_array_equal(H, knn_incidence_bruteforce(X, 3))
    assert H.sum(axis=0).min() >= 2
    assert H.shape == (20, 20)


def test_hypergraph_validation():
    with pytest.raises(ValueError, match="0 or 1"):
        Hypergraph(sp.csr_array(np.array([[2.0]])))
    with pytest.raises(ValueError, match="at least one vertex"):
        Hypergraph(sp.csr_array(np.array([[1.0, 0.0]])))
    with pytest.raises(ValueError, match="positive"):
        Hypergraph(sp.csr_array(np.eye(2)), np.array([1.0, 0.0]))


def test_graph_operator_single_edge():
    A = sp.csr_array(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(graph_operator(A).toarray(), [[0.5, 0.5], [0.5, 0.5]])


def test_graph_operator_isolated_vertex():
    np.testing.assert_array_equal(graph_operator(sp.csr_array((1, 1))).toarray(), [[1.0]])


def test_graph_operator_path_matches_dense():
    A = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    P = graph_operator(sp.csr_array(A)).toarray()
    np.testing.assert_allclose(P, graph_operator_dense(A), rtol=0, atol=1e-12)
    np.testing.assert_allclose(np.diag(P), 1.0 / (A.sum(axis=1) + 1))
    assert np.all((P[P != 0] > 0) & (P[P != 0] <= 1))


def test_graph_operator_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        graph_operator(sp.csr_array(np.array([[0.0, 1.0], [0.0, 0.0]])))


@pytest.mark.parametrize("n", [3, 5, 8])
def test_graph_operator_cycle_rows_sum_to_one(n):
    A = np.zeros((n, n))
    for i in range(n):
        A[i, (i + 1) % n] = A[(i + 1) % n, i] = 1
    P = graph_operator(sp.csr_array(A)).toarray()
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)


def test_hypergraph_operator_examples():
    one_edge = Hypergraph(sp.csr_array(np.array([[1.0], [1.0]])))
    np.testing.assert_allclose(hypergraph_operator(one_edge).toarray(), [[0.5, 0.5], [0.5, 0.5]])
    ident = Hypergraph(sp.eye_array(4, format="csr"))
    np.testing.assert_allclose(hypergraph_operator(ident).toarray(), np.eye(4))


def test_hypergraph_operator_zero_degree_vertex():
    # vertex 1 is in no hyperedge
    H = sp.csr_array(np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(ValueError, match="vertex 1"):
        hypergraph_operator(Hypergraph(H))


def random_hypergraph(rng, n, m):
    H = (rng.random((n, m)) < 0.3).astype(float)
    for e in range(m):
        H[rng.integers(n), e] = 1.0
    for v in range(n):
        H[v, rng.integers(m)] = 1.0
    return H


@pytest.mark.parametrize("seed", range(5))
def test_hypergraph_operator_matches_dense_and_is_psd(seed):
    rng = np.random.default_rng(seed)
    H = random_hypergraph(rng, 10, 7)
    w = rng.uniform(0.5, 2.0, size=7)
    theta = hypergraph_operator(Hypergraph(sp.csr_array(H), w)).toarray()
    np.testing.assert_allclose(theta, hypergraph_operator_dense(H, w), rtol=0, atol=1e-12)
    np.testing.assert_array_equal(theta, theta.T)
    ev = np.linalg.eigvalsh(theta)
    assert ev.min() >= -1e-10 and ev.max() <= 1 + 1e-10
    # factorization Theta = M M^T
    dv, de = H @ w, H.sum(axis=0)
    M = np.diag(dv ** -0.5) @ H @ np.diag(np.sqrt(w / de))
    np.testing.assert_allclose(theta, M @ M.T, atol=1e-12)


def test_two_uniform_hypergraph_is_normalized_weighted_graph():
    # hyperedges {0,1}, {1,2}, {2,3}, {1,3} with weights
    pairs = [(0, 1), (1, 2), (2, 3), (1, 3)]
    w = np.array([1.0, 2.0, 0.5, 3.0])
    H = np.zeros((4, 4))
    Aw = np.zeros((4, 4))
    for e, (i, j) in enumerate(pairs):
        H[i, e] = H[j, e] = 1
        Aw[i, j] = Aw[j, i] = w[e]
    d = Aw.sum(axis=1)
    expected = 0.5 * (np.eye(4) + np.diag(d ** -0.5) @ Aw @ np.diag(d ** -0.5))
    theta = hypergraph_operator(Hypergraph(sp.csr_array(H), w)).toarray()
    np.testing.assert_allclose(theta, expected, atol=1e-14)


def test_knn_hypergraph_operator_psd_on_random_features():
    X = np.random.default_rng(9).normal(size=(50, 5))
    theta = hypergraph_operator(knn_hypergraph(X, 5)).toarray()
    np.linalg.cholesky(theta + 1e-12 * np.eye(50))
    ev = np.linalg.eigvalsh(theta)
    assert ev.min() >= -1e-10 and ev.max() <= 1 + 1e-10
