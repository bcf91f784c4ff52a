"""Shared fixtures: synthetic datasets, small hypergraphs, trained surrogates.

The synthetic blob dataset mimics a bag-of-words corpus: each class owns a
prototype of active columns, rows flip a fraction of bits at random. Noise
0.25 lands the surrogate in the useful middle ground (clearly better than
chance, clearly below perfect) so attack deltas have room to show up.
"""

import os

import numpy as np
import pytest

from hginject import (
    AttackConfig,
    Dataset,
    Hypergraph,
    TrainConfig,
    build_knn,
    load_planetoid,
    make_splits,
    normalized_adjacency,
    save_planetoid,
    train_surrogate,
)

CORA_DIR = os.environ.get("HGINJECT_CORA_DIR", os.path.join("data", "cora"))


def make_blob_dataset(
    num_nodes=60,
    num_features=24,
    num_classes=3,
    seed=7,
    noise=0.25,
    num_edges=90,
):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, size=num_nodes)
    labels[:num_classes] = np.arange(num_classes)  # every class occupied
    prototypes = rng.random((num_classes, num_features)) < 0.35
    flips = rng.random((num_nodes, num_features)) < noise
    features = np.logical_xor(prototypes[labels], flips).astype(np.float64)
    # Guard against all-zero rows, which KNN handles but are unrealistic.
    dead = features.sum(axis=1) == 0
    features[dead, 0] = 1.0

    edges = []
    for _ in range(num_edges):
        u, v = rng.integers(0, num_nodes, size=2)
        if u != v:
            edges.append((int(u), int(v)))
    return Dataset(
        node_ids=[f"n{i}" for i in range(num_nodes)],
        features=features,
        labels=labels.astype(np.int64),
        edges=edges,
        label_names=[f"c{k}" for k in range(num_classes)],
    )


def random_hypergraph(rng, max_nodes=12, max_edges=8, min_nodes=2):
    """Small random hypergraph; every hyperedge has >= 2 members."""
    n = int(rng.integers(min_nodes, max_nodes + 1))
    m = int(rng.integers(1, max_edges + 1))
    hyperedges = []
    for _ in range(m):
        size = int(rng.integers(2, n + 1))
        members = rng.choice(n, size=size, replace=False)
        hyperedges.append(sorted(int(i) for i in members))
    return Hypergraph.from_hyperedges(n, hyperedges)


@pytest.fixture
def two_edge_h():
    """The worked example: e0 = {v0, v1}, e1 = {v0, v2}."""
    return Hypergraph.from_hyperedges(3, [[0, 1], [0, 2]])


@pytest.fixture(scope="session")
def blob():
    """Dataset + KNN hypergraph + adjacency + splits, shared read-only."""
    ds = make_blob_dataset()
    h = build_knn(ds.features, k=4)
    adjacency = normalized_adjacency(h)
    splits = make_splits(ds, per_class_train=8, val_size=10, test_size=20, seed=2024)
    return ds, h, adjacency, splits


@pytest.fixture(scope="session")
def trained(blob):
    """Frozen surrogate trained on the blob fixture."""
    ds, h, adjacency, splits = blob
    params, history = train_surrogate(
        adjacency,
        ds.features,
        ds.labels,
        splits.train_idx,
        TrainConfig(hidden_dim=8, epochs=120, seed=2024),
    )
    return params, history


@pytest.fixture
def small_attack_config():
    return AttackConfig(eta=1.0, kernel="gaussian", max_iters=40, patience=10, seed=2024)


@pytest.fixture
def planetoid_dir(tmp_path):
    """A blob dataset written in planetoid format, for loader and CLI tests."""
    ds = make_blob_dataset(num_nodes=48, num_features=16, num_classes=3, seed=11)
    content = tmp_path / "toy.content"
    cites = tmp_path / "toy.cites"
    save_planetoid(ds, content, cites)
    return tmp_path, ds


def require_cora():
    """Load Cora or fail (never skip) with an actionable diagnostic."""
    content = os.path.join(CORA_DIR, "cora.content")
    cites = os.path.join(CORA_DIR, "cora.cites")
    if not (os.path.exists(content) and os.path.exists(cites)):
        pytest.fail(
            "Cora dataset not found: expected cora.content and cora.cites under "
            f"{CORA_DIR!r} (override with HGINJECT_CORA_DIR). This environment has "
            "no network access, so the files must be provided manually; see "
            "README 'Data' for the layout. Criterion requires real Cora and "
            "cannot run without it.",
            pytrace=False,
        )
    ds = load_planetoid(content, cites)
    if ds.num_nodes != 2708 or ds.num_features != 1433:
        pytest.fail(
            f"Cora at {CORA_DIR!r} has shape ({ds.num_nodes} nodes, "
            f"{ds.num_features} features); expected (2708, 1433).",
            pytrace=False,
        )
    return ds
