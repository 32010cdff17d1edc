"""
Tests for bipartite graphs, block-model specs and sampling
"""

import numpy as np
import pytest

from bcv.errors import EmptyCommunityError, GraphError, SpecError
from bcv.graph_core import (
    BipartiteGraph,
    ExplicitLabels,
    LabelVector,
    Multinomial,
    SbmSpec,
    generate_sbm,
    reduced_svd_factors,
    scaled_block_matrix,
    true_mean_matrix,
)


def test_all_ones_block_gives_complete_graph():
    graph, c1, c2 = generate_sbm(SbmSpec([[1.0]]), 3, 4, seed=7)
    assert graph.num_edges == 12
    assert graph.density == 1.0
    assert np.all(c1.labels == 0) and np.all(c2.labels == 0)


def test_all_zero_block_gives_empty_graph():
    graph, _, _ = generate_sbm(SbmSpec([[0.0, 0.0], [0.0, 0.0]]), 20, 30, seed=1)
    assert graph.num_edges == 0
    assert graph.shape == (20, 30)


def test_block_densities_concentrate():
    n = 200
    c = np.repeat([0, 1], n // 2)
    spec = SbmSpec([[0.9, 0.1], [0.1, 0.9]], ExplicitLabels(c, c))
    graph, c1, c2 = generate_sbm(spec, n, n, seed=3)
    A = graph.to_dense()
    bound = 5 * np.sqrt(0.9 * 0.1 / 10000)
    for k1 in range(2):
        for k2 in range(2):
            block = A[np.ix_(c1.labels == k1, c2.labels == k2)]
            assert abs(block.mean() - spec.B[k1, k2]) <= bound


def test_generation_is_reproducible():
    spec = SbmSpec([[0.3, 0.05], [0.05, 0.3]])
    first = generate_sbm(spec, 50, 70, seed=123)
    second = generate_sbm(spec, 50, 70, seed=123)
    assert first[0] == second[0]
    assert first[1] == second[1] and first[2] == second[2]
    assert generate_sbm(spec, 50, 70, seed=124)[0] != first[0]


def test_multinomial_membership_fills_every_community():
    spec = SbmSpec(np.full((3, 4), 0.2), Multinomial([1 / 6, 1 / 3, 1 / 2], [0.25] * 4))
    for seed in range(20):
        _, c1, c2 = generate_sbm(spec, 30, 40, seed=seed)
        assert c1.num_nonempty() == 3 and c2.num_nonempty() == 4


def test_zero_proportion_exhausts_retries():
    spec = SbmSpec([[0.5, 0.5]], Multinomial([1.0], [1.0, 0.0]))
    with pytest.raises(EmptyCommunityError):
        generate_sbm(spec, 5, 5, seed=0)


def test_spec_validation():
    with pytest.raises(SpecError):
        SbmSpec([[1.2]])
    with pytest.raises(SpecError):
        SbmSpec([[0.5, 0.5]], Multinomial([1.0], [0.6, 0.5]))
    with pytest.raises(SpecError):
        SbmSpec([[0.5]], ExplicitLabels([0, 1], [0]))
    spec = SbmSpec([[0.5, 0.2]], ExplicitLabels([0, 0], [0, 1, 1]))
    with pytest.raises(SpecError):
        generate_sbm(spec, 3, 3, seed=0)


def test_graph_validation():
    with pytest.raises(GraphError):
        BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 0)])
    with pytest.raises(GraphError):
        BipartiteGraph.from_edges(2, 2, [(2, 0)])
    with pytest.raises(GraphError):
        BipartiteGraph.from_edges(0, 2, [])
    with pytest.raises(GraphError):
        BipartiteGraph.from_dense([[0, 2]])


def test_graph_views():
    graph = BipartiteGraph.from_edges(3, 4, [(2, 1), (0, 3), (0, 0), (1, 1)])
    assert list(graph.edges()) == [(0, 0), (0, 3), (1, 1), (2, 1)]
    assert graph.row_neighbors(0).tolist() == [0, 3]
    assert sorted(graph.col_neighbors(1).tolist()) == [1, 2]
    assert graph.degrees(1).tolist() == [2, 1, 1]
    assert graph.degrees(2).tolist() == [1, 2, 0, 1]
    assert graph.flat_index.tolist() == [0, 3, 5, 9]
    np.testing.assert_array_equal(graph.csr.toarray(), graph.to_dense())
    np.testing.assert_array_equal(graph.csc.toarray(), graph.to_dense())
    assert BipartiteGraph.from_dense(graph.to_dense()) == graph


def test_label_vector_helpers():
    labels = LabelVector([0, 2, 2, 1, 2, 0], K=4)
    assert labels.counts().tolist() == [2, 1, 3, 0]
    assert labels.num_nonempty() == 3
    assert labels.balance() == 0.0
    Z = labels.one_hot().toarray()
    assert Z.shape == (6, 4)
    np.testing.assert_array_equal(Z.sum(axis=1), np.ones(6))
    np.testing.assert_array_equal(Z.argmax(axis=1), labels.labels)
    assert LabelVector([0, 1, 1], K=2).balance() == pytest.approx(1 / 3)
    with pytest.raises(SpecError):
        LabelVector([0, 3], K=3)


def test_true_mean_matrix_examples():
    P = true_mean_matrix(SbmSpec([[0.3]]), LabelVector([0, 0], 1), LabelVector([0, 0, 0], 1))
    np.testing.assert_array_equal(P, np.full((2, 3), 0.3))

    B = [[0.1, 0.2], [0.3, 0.4]]
    P = true_mean_matrix(SbmSpec(B), LabelVector([0, 1], 2), LabelVector([0, 1], 2))
    np.testing.assert_array_equal(P, np.array(B))


def test_reduced_svd_reconstructs_mean_matrix():
    rng = np.random.default_rng(11)
    for _ in range(50):
        K1, K2 = rng.integers(1, 4, size=2)
        n1, n2 = 6, 5
        c1 = rng.permutation(np.arange(n1) % K1)
        c2 = rng.permutation(np.arange(n2) % K2)
        spec = SbmSpec(rng.uniform(0, 1, size=(K1, K2)))
        l1, l2 = LabelVector(c1, K1, 1), LabelVector(c2, K2, 2)

        P = true_mean_matrix(spec, l1, l2)
        left, sigma, right = reduced_svd_factors(spec, l1, l2)
        np.testing.assert_allclose((left * sigma) @ right.T, P, atol=1e-10)
        assert np.linalg.matrix_rank(P) <= min(K1, K2)


def test_scaled_block_matrix():
    c1 = LabelVector([0, 0, 0, 0, 1], 2)
    c2 = LabelVector([0, 1, 1], 2)
    Bbar = scaled_block_matrix(np.array([[1.0, 0.5], [0.25, 1.0]]), c1, c2)
    expected = np.array([[2 * 1 * 1.0, 2 * np.sqrt(2) * 0.5], [1 * 1 * 0.25, np.sqrt(2) * 1.0]])
    np.testing.assert_allclose(Bbar, expected)
