"""Elite node scoring and budgeted elite-hyperedge selection.

A node's cycle ratio measures how much of its co-membership neighbourhood it
spans: with C = H @ H^T,

    p_i = sum over nodes j of C_ij / C_jj

taken over the stored nonzeros of row i (terms with C_jj = 0 cannot occur
there, and the self term j = i contributes 1 for any non-isolated node).
The elite node is the cycle-ratio argmax, its hyperedges are the candidate
injection sites, and the budget keeps the largest max(1, round(eta * omega))
of them.

Centrality-based elites (degree, betweenness, eigenvector, pagerank) are
computed on the clique expansion via networkx and exist for head-to-head
comparisons with the cycle-ratio rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NoEliteError
from .hypergraph import Hypergraph, clique_expand

CENTRALITY_METHODS = ("degree", "betweenness", "eigenvector", "pagerank")


@dataclass
class CycleStats:
    """Per-node cycle ratios with the co-membership matrix behind them.

    ``cycle_matrix`` is the sparse symmetric count matrix H @ H^T whose
    diagonal equals the node degrees. The JSON audit form carries only the
    ratios, so a deserialized instance has ``cycle_matrix = None``.
    """

    ratios: np.ndarray
    cycle_matrix: sp.csr_matrix | None = None

    def to_json(self) -> str:
        return json.dumps({"ratios": self.ratios.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "CycleStats":
        return cls(np.asarray(json.loads(text)["ratios"], dtype=np.float64))


@dataclass
class EliteSelection:
    elite_node: int
    elite_hyperedges: np.ndarray
    component_fallback: bool = field(default=False)

    @property
    def omega(self) -> int:
        return len(self.elite_hyperedges)

    def to_json(self) -> str:
        return json.dumps(
            {
                "elite_node": int(self.elite_node),
                "elite_hyperedges": [int(e) for e in self.elite_hyperedges],
                "component_fallback": self.component_fallback,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "EliteSelection":
        doc = json.loads(text)
        return cls(
            int(doc["elite_node"]),
            np.asarray(doc["elite_hyperedges"], dtype=np.int64),
            bool(doc.get("component_fallback", False)),
        )


def cycle_ratios(h: Hypergraph) -> CycleStats:
    """Sparse evaluation of the cycle ratio for every node.

    C = H @ H^T stays sparse; p = C @ inv_diag works because any column j
    with a stored off-diagonal entry necessarily has C_jj > 0, so the
    zero-diagonal entries it skips contribute nothing anyway.
    """
    C = (h.incidence @ h.incidence.T).tocsr()
    diag = C.diagonal()
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 0.0)
    ratios = np.asarray(C @ inv_diag, dtype=np.float64).ravel()
    return CycleStats(ratios, cycle_matrix=C)


def select_elite(h: Hypergraph, stats: CycleStats) -> EliteSelection:
    """Highest cycle ratio wins; ties go to the lowest node index."""
    p = stats.ratios
    if len(p) == 0 or p.max() <= 0.0:
        raise NoEliteError("every node is isolated; no elite exists")
    elite = int(np.argmax(p))
    return EliteSelection(elite, h.hyperedges_containing(elite))


def budget_subset(sel: EliteSelection, h: Hypergraph, eta: float) -> list[int]:
    """Largest max(1, round(eta * omega)) elite hyperedges, size then index.

    Ranking is by descending column sum with ties broken by ascending
    hyperedge index, so the output is deterministic.
    """
    if not 0.0 < eta <= 1.0:
        raise ConfigError(f"eta must lie in (0, 1], got {eta}")
    if sel.omega == 0:
        raise NoEliteError(f"node {sel.elite_node} participates in no hyperedge")
    count = max(1, round(eta * sel.omega))
    sizes = h.edge_degrees[sel.elite_hyperedges]
    # lexsort: last key is primary, so order by (-size, index).
    order = np.lexsort((sel.elite_hyperedges, -sizes))
    return [int(e) for e in sel.elite_hyperedges[order][:count]]


def centrality_elite(h: Hypergraph, method: str) -> EliteSelection:
    """Elite node by a classical centrality on the clique expansion."""
    if method not in CENTRALITY_METHODS:
        raise ConfigError(
            f"unknown centrality {method!r}; expected one of {CENTRALITY_METHODS}"
        )
    g = nx.Graph()
    g.add_nodes_from(range(h.num_nodes))
    g.add_edges_from(clique_expand(h))

    fallback = False
    if method == "degree":
        scores = {i: d for i, d in g.degree()}
    elif method == "betweenness":
        scores = nx.betweenness_centrality(g)
    elif method == "pagerank":
        scores = nx.pagerank(g, alpha=0.85, tol=1e-8, max_iter=1000)
    else:
        try:
            scores = nx.eigenvector_centrality(g, max_iter=1000, tol=1e-8)
        except nx.PowerIterationFailedConvergence:
            component = max(nx.connected_components(g), key=len)
            sub = nx.eigenvector_centrality(
                g.subgraph(component), max_iter=1000, tol=1e-8
            )
            scores = {i: sub.get(i, 0.0) for i in g.nodes}
            fallback = True

    arr = np.array([scores[i] for i in range(h.num_nodes)], dtype=np.float64)
    if arr.max() <= 0.0:
        raise NoEliteError("every node is isolated; no elite exists")
    elite = int(np.argmax(arr))
    edges = h.hyperedges_containing(elite)
    if len(edges) == 0:
        raise NoEliteError(f"node {elite} participates in no hyperedge")
    return EliteSelection(elite, edges, component_fallback=fallback)
