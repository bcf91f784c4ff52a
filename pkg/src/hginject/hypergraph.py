"""Hypergraph construction and the incidence-matrix data structure.

A hypergraph is held as a sparse binary incidence matrix ``H`` with one row
per node and one column per hyperedge, together with its node/edge degree
vectors. Hyperedge weights are the identity and are never materialized.

Three constructors are provided: feature k-nearest-neighbour hyperedges,
higher-order graph neighbourhoods, and per-node L1 distance-quantile balls.
All of them break distance ties by ascending node index, so construction is
deterministic for identical inputs.
"""

from __future__ import annotations

import json

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .errors import BudgetError, ConfigError, SchemaError


class Hypergraph:
    """Immutable sparse incidence matrix with derived degree vectors.

    Entries of ``incidence`` are exactly 0 or 1 and every column sums to at
    least 2 (a hyperedge joins two or more nodes). Rows may be all-zero:
    isolated nodes are legal.
    """

    def __init__(self, incidence: sp.spmatrix, validate: bool = True):
        H = sp.csr_matrix(incidence, dtype=np.float64)
        H.sum_duplicates()
        H.sort_indices()
        if validate:
            if H.nnz and not np.all(H.data == 1.0):
                raise SchemaError("incidence entries must be exactly 0 or 1")
            col_sums = np.asarray(H.sum(axis=0)).ravel()
            if H.shape[1] and col_sums.min() < 2:
                bad = int(np.flatnonzero(col_sums < 2)[0])
                raise SchemaError(f"hyperedge {bad} has fewer than 2 members")
        self.incidence = H
        self.node_degrees = np.asarray(H.sum(axis=1)).ravel()
        self.edge_degrees = np.asarray(H.sum(axis=0)).ravel()

    @property
    def num_nodes(self) -> int:
        return self.incidence.shape[0]

    @property
    def num_edges(self) -> int:
        return self.incidence.shape[1]

    def hyperedge_members(self, j: int) -> np.ndarray:
        """Sorted node indices of hyperedge ``j``."""
        col = self.incidence.getcol(j).tocoo()
        return np.sort(col.row.astype(np.int64))

    def hyperedges_containing(self, i: int) -> np.ndarray:
        """Sorted hyperedge indices whose member set includes node ``i``."""
        start, stop = self.incidence.indptr[i], self.incidence.indptr[i + 1]
        return np.sort(self.incidence.indices[start:stop].astype(np.int64))

    def to_json(self) -> str:
        cols = self.incidence.tocsc()
        hyperedges = [
            sorted(int(i) for i in cols.indices[cols.indptr[j] : cols.indptr[j + 1]])
            for j in range(self.num_edges)
        ]
        return json.dumps({"num_nodes": self.num_nodes, "hyperedges": hyperedges})

    @classmethod
    def from_json(cls, text: str) -> "Hypergraph":
        doc = json.loads(text)
        n = int(doc["num_nodes"])
        hyperedges = doc["hyperedges"]
        rows, cols = [], []
        for j, members in enumerate(hyperedges):
            for i in members:
                rows.append(int(i))
                cols.append(j)
        H = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(n, len(hyperedges))
        )
        return cls(H)

    @classmethod
    def from_hyperedges(cls, num_nodes: int, hyperedges: list[list[int]]) -> "Hypergraph":
        """Convenience constructor used heavily by tests and fixtures."""
        rows, cols = [], []
        for j, members in enumerate(hyperedges):
            for i in members:
                rows.append(int(i))
                cols.append(j)
        H = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(num_nodes, len(hyperedges))
        )
        return cls(H)


def _pairwise_sq_euclidean(features: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", features, features)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (features @ features.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def build_knn(features: np.ndarray, k: int) -> Hypergraph:
    """One hyperedge per node: the node plus its ``k`` nearest neighbours.

    Distances are Euclidean over feature rows, the node itself is excluded
    from its own neighbour search, and ties are broken by ascending node
    index. Every column therefore sums to exactly ``k + 1``.
    """
    n = features.shape[0]
    if k < 1:
        raise BudgetError(f"k must be >= 1, got {k}")
    if k >= n:
        raise BudgetError(f"k={k} needs at least {k + 1} nodes, got {n}")

    d2 = _pairwise_sq_euclidean(np.asarray(features, dtype=np.float64))
    np.fill_diagonal(d2, np.inf)
    # Stable sort so equal distances resolve to the lowest node index.
    order = np.argsort(d2, axis=1, kind="stable")
    neighbours = order[:, :k]

    rows = np.concatenate([neighbours.ravel(), np.arange(n)])
    cols = np.concatenate([np.repeat(np.arange(n), k), np.arange(n)])
    H = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    return Hypergraph(H)


def build_hor(edges: list[tuple[int, int]], num_nodes: int, order: int) -> Hypergraph:
    """One hyperedge per node: the node plus all nodes within ``order`` hops.

    Edges are treated as undirected; self-loops contribute nothing. Nodes
    whose neighbourhood is only themselves (isolated nodes) produce no
    hyperedge, so the number of hyperedges can be below ``num_nodes``.
    """
    if order < 1:
        raise ConfigError(f"order must be >= 1, got {order}")

    pairs = [(u, v) for u, v in edges if u != v]
    if pairs:
        arr = np.asarray(pairs, dtype=np.int64)
        rows = np.concatenate([arr[:, 0], arr[:, 1]])
        cols = np.concatenate([arr[:, 1], arr[:, 0]])
        A = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(num_nodes, num_nodes)
        )
        A.sum_duplicates()
        A.data[:] = 1.0
    else:
        A = sp.csr_matrix((num_nodes, num_nodes))

    P = (A + sp.eye(num_nodes, format="csr")).astype(bool)
    R = P.copy()
    for _ in range(order - 1):
        R = (R @ P).astype(bool)

    R = sp.csc_matrix(R.astype(np.float64))
    keep = np.asarray(R.sum(axis=0)).ravel() >= 2
    return Hypergraph(R[:, keep])


def build_l1(features: np.ndarray, gamma: float) -> Hypergraph:
    """One hyperedge per node: nodes within the node's L1 distance quantile.

    For node ``i`` the radius is the empirical ``gamma``-quantile (inverse
    CDF) of its L1 distances to all other nodes; the hyperedge is ``i`` plus
    every node at distance <= that radius. A hyperedge that would end up
    smaller than 2 is padded with the single L1-nearest neighbour.
    """
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")

    X = np.asarray(features, dtype=np.float64)
    n = X.shape[0]
    D = cdist(X, X, metric="cityblock")
    np.fill_diagonal(D, np.inf)

    rows, cols = [], []
    others_mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        d = D[i][others_mask[i]]
        thr = np.quantile(d, gamma, method="inverted_cdf")
        members = np.flatnonzero(D[i] <= thr)
        if members.size == 0:
            members = np.array([int(np.argmin(D[i]))])
        for j in members:
            rows.append(int(j))
            cols.append(i)
        rows.append(i)
        cols.append(i)

    H = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return Hypergraph(H)


def clique_expand(h: Hypergraph) -> list[tuple[int, int]]:
    """Pairwise edges between every two nodes sharing at least one hyperedge.

    No self-loops, no duplicates; pairs are returned sorted with u < v.
    """
    co = (h.incidence @ h.incidence.T).tocoo()
    mask = co.row < co.col
    pairs = sorted(zip(co.row[mask].tolist(), co.col[mask].tolist()))
    return [(int(u), int(v)) for u, v in pairs]
