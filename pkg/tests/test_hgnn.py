"""Surrogate model tests: aggregation, forward pass, training, gradients.

The dense oracle recomputes the normalized aggregation with plain dense
matrix products and explicit zero-inverse degree handling, independently of
the sparse production path.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hginject import (
    Hypergraph,
    SurrogateParams,
    TrainConfig,
    cross_entropy_feature_gradient,
    cross_entropy_loss,
    forward,
    hidden_embeddings,
    init_params,
    log_softmax,
    misclassification_rate,
    normalized_adjacency,
    predict,
    train_surrogate,
)
from hginject.errors import DivergenceError

from conftest import random_hypergraph


def dense_adjacency_oracle(h):
    """Dv^-1/2 H De^-1 H^T Dv^-1/2 via dense products and 0-inverse."""
    H = h.incidence.toarray()
    dv = H.sum(axis=1)
    de = H.sum(axis=0)
    inv_sqrt_dv = np.where(dv > 0, 1.0 / np.sqrt(np.where(dv > 0, dv, 1.0)), 0.0)
    inv_de = np.where(de > 0, 1.0 / np.where(de > 0, de, 1.0), 0.0)
    return np.diag(inv_sqrt_dv) @ H @ np.diag(inv_de) @ H.T @ np.diag(inv_sqrt_dv)


def fixed_params(n_feat, hidden, n_cls, seed=0, frozen=True):
    p = init_params(n_feat, hidden, n_cls, np.random.default_rng(seed))
    return p.freeze() if frozen else p


class TestNormalizedAdjacency:
    def test_single_hyperedge_half_matrix(self):
        h = Hypergraph.from_hyperedges(2, [[0, 1]])
        np.testing.assert_allclose(
            normalized_adjacency(h), [[0.5, 0.5], [0.5, 0.5]], atol=1e-15, rtol=0
        )

    def test_empty_incidence_zero_matrix(self):
        import scipy.sparse as sp

        h = Hypergraph(sp.csr_matrix((3, 0)))
        np.testing.assert_array_equal(normalized_adjacency(h), np.zeros((3, 3)))

    def test_bitwise_symmetric(self, two_edge_h):
        a = normalized_adjacency(two_edge_h)
        assert np.array_equal(a, a.T)

    def test_isolated_node_row_is_zero(self):
        h = Hypergraph.from_hyperedges(4, [[0, 1]])
        a = normalized_adjacency(h)
        np.testing.assert_array_equal(a[2], np.zeros(4))
        np.testing.assert_array_equal(a[3], np.zeros(4))
        assert a[0, 0] > 0

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=80, deadline=None)
    def test_matches_dense_oracle(self, seed):
        h = random_hypergraph(np.random.default_rng(seed))
        got = normalized_adjacency(h)
        want = dense_adjacency_oracle(h)
        np.testing.assert_allclose(got, want, atol=1e-12, rtol=0)
        assert np.array_equal(got, got.T)


class TestForward:
    def test_identity_collapse(self):
        # A = I, theta1 = theta2 = I: logits = relu(X)
        p = SurrogateParams(np.eye(3), np.eye(3)).freeze()
        x = np.array([[1.0, -2.0, 0.5], [-1.0, 4.0, 0.0]])
        np.testing.assert_array_equal(forward(np.eye(2), x, p), np.maximum(x, 0))

    def test_zero_features_zero_logits(self, two_edge_h):
        a = normalized_adjacency(two_edge_h)
        p = fixed_params(4, 3, 2)
        np.testing.assert_array_equal(
            forward(a, np.zeros((3, 4)), p), np.zeros((3, 2))
        )

    def test_matches_hand_chain(self):
        h = Hypergraph.from_hyperedges(2, [[0, 1]])
        a = normalized_adjacency(h)
        theta1 = np.array([[1.0, -1.0], [0.5, 2.0]])
        theta2 = np.array([[1.0, 0.0, 1.0], [-1.0, 1.0, 0.0]])
        p = SurrogateParams(theta1, theta2).freeze()
        x = np.array([[1.0, 2.0], [3.0, -1.0]])
        want = a @ (np.maximum(a @ x @ theta1, 0.0) @ theta2)
        np.testing.assert_allclose(forward(a, x, p), want, atol=1e-15)

    def test_positive_homogeneity_of_hidden(self, two_edge_h):
        a = normalized_adjacency(two_edge_h)
        p = fixed_params(3, 4, 2)
        x = np.random.default_rng(5).normal(size=(3, 3))
        np.testing.assert_allclose(
            hidden_embeddings(a, 2.5 * x, p),
            2.5 * hidden_embeddings(a, x, p),
            atol=1e-12,
        )

    def test_dimension_mismatch_raises(self, two_edge_h):
        a = normalized_adjacency(two_edge_h)
        p = fixed_params(4, 3, 2)
        with pytest.raises(ValueError):
            forward(a, np.zeros((3, 7)), p)


class TestScoring:
    def test_log_softmax_rows_normalize(self):
        z = np.array([[1.0, 2.0, 3.0], [100.0, 100.0, 100.0]])
        np.testing.assert_allclose(np.exp(log_softmax(z)).sum(axis=1), [1.0, 1.0])

    def test_log_softmax_stable_at_large_logits(self):
        z = np.array([[1e4, 0.0]])
        out = log_softmax(z)
        assert np.all(np.isfinite(out))

    def test_predict_tie_breaks_lowest_index(self):
        z = np.array([[1.0, 1.0], [0.0, 1.0]])
        np.testing.assert_array_equal(predict(z), [0, 1])

    def test_perfect_classifier_rate_zero(self):
        z = np.array([[5.0, 0.0], [0.0, 5.0]])
        assert misclassification_rate(z, np.array([0, 1]), np.array([0, 1])) == 0.0

    def test_constant_logits_balanced_two_class(self):
        z = np.zeros((4, 2))
        labels = np.array([0, 0, 1, 1])
        rate = misclassification_rate(z, labels, np.arange(4))
        assert rate == 50.0

    def test_empty_index_set_rejected(self):
        with pytest.raises(ValueError):
            misclassification_rate(np.zeros((2, 2)), np.zeros(2, dtype=int), np.array([], dtype=int))


class TestFrozenContract:
    def test_freeze_makes_weights_immutable(self):
        p = fixed_params(3, 2, 2, frozen=False)
        p.freeze()
        with pytest.raises(ValueError):
            p.theta1[0, 0] = 9.0

    def test_copy_of_frozen_is_writable(self):
        p = fixed_params(3, 2, 2)
        q = p.copy()
        q.theta1[0, 0] = 9.0  # no raise
        assert not q.frozen


class TestTrainSurrogate:
    def test_separable_two_blob_fixture_fits(self):
        # 8 nodes, two blobs of 4, one hyperedge per blob
        x = np.zeros((8, 2))
        x[:4, 0] = 1.0
        x[4:, 1] = 1.0
        labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        h = Hypergraph.from_hyperedges(8, [[0, 1, 2, 3], [4, 5, 6, 7]])
        a = normalized_adjacency(h)
        params, _ = train_surrogate(
            a, x, labels, np.arange(8), TrainConfig(hidden_dim=4, epochs=200, seed=1)
        )
        rate = misclassification_rate(forward(a, x, params), labels, np.arange(8))
        assert rate == 0.0

    def test_lr_zero_leaves_weights_at_init(self, blob):
        ds, h, a, splits = blob
        cfg = TrainConfig(hidden_dim=4, learning_rate=0.0, epochs=5, seed=3)
        params, history = train_surrogate(a, ds.features, ds.labels, splits.train_idx, cfg)
        want = init_params(ds.num_features, 4, ds.num_classes, np.random.default_rng(3))
        np.testing.assert_array_equal(params.theta1, want.theta1)
        np.testing.assert_array_equal(params.theta2, want.theta2)
        np.testing.assert_allclose(history, [history[0]] * 5)

    def test_fixed_seed_bitwise_reproducible(self, blob):
        ds, h, a, splits = blob
        cfg = TrainConfig(hidden_dim=4, epochs=30, seed=11)
        p1, h1 = train_surrogate(a, ds.features, ds.labels, splits.train_idx, cfg)
        p2, h2 = train_surrogate(a, ds.features, ds.labels, splits.train_idx, cfg)
        assert h1 == h2
        np.testing.assert_array_equal(p1.theta1, p2.theta1)
        np.testing.assert_array_equal(p1.theta2, p2.theta2)

    def test_returns_frozen_params(self, trained):
        params, _ = trained
        assert params.frozen
        with pytest.raises(ValueError):
            params.theta1[0, 0] = 1.0

    def test_loss_history_decreases(self, trained):
        _, history = trained
        assert history[-1] < history[0]

    def test_divergence_raises_with_epoch(self, blob):
        ds, h, a, splits = blob
        # An absurd learning rate overflows the logits within a few epochs.
        cfg = TrainConfig(hidden_dim=4, learning_rate=1e200, epochs=50, seed=0)
        with pytest.raises(DivergenceError):
            train_surrogate(a, ds.features, ds.labels, splits.train_idx, cfg)


class TestCrossEntropyGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        h = random_hypergraph(rng, max_nodes=8, max_edges=5, min_nodes=4)
        n = h.num_nodes
        a = normalized_adjacency(h)
        x = rng.normal(size=(n, 3)) + 0.5
        labels = rng.integers(0, 2, size=n)
        idx = np.arange(n)
        p = fixed_params(3, 4, 2, seed=7)

        grad = cross_entropy_feature_gradient(a, x, labels, idx, p)
        step = 1e-5
        for _ in range(20):
            i = int(rng.integers(0, n))
            j = int(rng.integers(0, 3))
            xp, xm = x.copy(), x.copy()
            xp[i, j] += step
            xm[i, j] -= step
            fd = (
                cross_entropy_loss(a, xp, labels, idx, p)
                - cross_entropy_loss(a, xm, labels, idx, p)
            ) / (2 * step)
            denom = max(abs(fd), 1e-6)
            assert abs(grad[i, j] - fd) / denom < 1e-4
