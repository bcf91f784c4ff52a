"""Citation-style dataset loading and deterministic splits.

The canonical input is the Planetoid plain-text pair:

    <name>.content   lines of `<id> <f_1> ... <f_F> <label>`
    <name>.cites     lines of `<id> <id>`

Everything is whitespace-delimited. Node order follows the content file,
label strings are mapped to dense integers by first appearance, and cite
lines whose endpoints are unknown are dropped (and counted).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyInputError,
    ParseError,
    SchemaError,
    StratificationError,
)


@dataclass
class Dataset:
    """In-memory node-classification dataset.

    Attributes
    ----------
    node_ids : list of str
        Opaque identifiers, in file order.
    features : ndarray, shape (n, f), float64
        Non-negative feature matrix, row-aligned with ``node_ids``.
    labels : ndarray, shape (n,), int64
        Dense class indices in ``[0, num_classes)``.
    edges : list of (int, int)
        Pairwise edges as node indices; used by graph-based hypergraph
        construction. Direction is preserved from the file but consumers
        treat edges as undirected.
    label_names : list of str
        Original label string for each dense class index.
    dropped_edges : int
        Count of cite lines discarded because an endpoint was unknown.
    """

    node_ids: list[str]
    features: np.ndarray
    labels: np.ndarray
    edges: list[tuple[int, int]] = field(default_factory=list)
    label_names: list[str] = field(default_factory=list)
    dropped_edges: int = 0

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.label_names) if self.label_names else int(self.labels.max()) + 1

    def validate(self) -> None:
        n = self.num_nodes
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise SchemaError(
                f"row mismatch: {n} ids, {self.features.shape[0]} feature rows, "
                f"{self.labels.shape[0]} labels"
            )
        if self.num_classes < 2:
            raise SchemaError(f"need at least 2 classes, got {self.num_classes}")
        if self.num_features < 1:
            raise SchemaError("need at least 1 feature column")
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise SchemaError(f"edge ({u}, {v}) references unknown node index")


@dataclass
class Splits:
    """Disjoint train/validation/test index sets over ``[0, n)``.

    Index arrays are kept sorted so equal splits compare bitwise-equal.
    """

    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "train": self.train_idx.tolist(),
                "val": self.val_idx.tolist(),
                "test": self.test_idx.tolist(),
                "seed": self.seed,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Splits":
        doc = json.loads(text)
        return cls(
            train_idx=np.asarray(doc["train"], dtype=np.int64),
            val_idx=np.asarray(doc["val"], dtype=np.int64),
            test_idx=np.asarray(doc["test"], dtype=np.int64),
            seed=int(doc["seed"]),
        )


def _parse_content_line(tokens: list[str], path: str, lineno: int) -> tuple[str, list[float], str]:
    if len(tokens) < 3:
        raise ParseError(
            f"{path}:{lineno}: expected `<id> <f_1> ... <f_F> <label>`, got {len(tokens)} tokens"
        )
    node_id, label = tokens[0], tokens[-1]
    try:
        feats = [float(t) for t in tokens[1:-1]]
    except ValueError as exc:
        raise ParseError(f"{path}:{lineno}: non-numeric feature value ({exc})") from None
    return node_id, feats, label


def load_planetoid(content_path: str | Path, cites_path: str | Path) -> Dataset:
    """Load a Planetoid-format `.content`/`.cites` pair.

    Raises
    ------
    ParseError
        A line cannot be tokenized; the message carries the line number.
    SchemaError
        Inconsistent feature width or duplicate node id.
    EmptyInputError
        The content file holds no records.
    """
    content_path = Path(content_path)
    cites_path = Path(cites_path)

    node_ids: list[str] = []
    rows: list[list[float]] = []
    label_strings: list[str] = []
    index_of: dict[str, int] = {}
    width = None

    with content_path.open("r") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            node_id, feats, label = _parse_content_line(tokens, str(content_path), lineno)
            if width is None:
                width = len(feats)
            elif len(feats) != width:
                raise SchemaError(
                    f"{content_path}:{lineno}: {len(feats)} features, expected {width}"
                )
            if node_id in index_of:
                raise SchemaError(f"{content_path}:{lineno}: duplicate node id {node_id!r}")
            index_of[node_id] = len(node_ids)
            node_ids.append(node_id)
            rows.append(feats)
            label_strings.append(label)

    if not node_ids:
        raise EmptyInputError(f"{content_path}: no records")

    # Dense labels by first-appearance order of the label strings.
    label_names: list[str] = []
    label_index: dict[str, int] = {}
    labels = np.empty(len(node_ids), dtype=np.int64)
    for i, name in enumerate(label_strings):
        if name not in label_index:
            label_index[name] = len(label_names)
            label_names.append(name)
        labels[i] = label_index[name]

    edges: list[tuple[int, int]] = []
    dropped = 0
    with cites_path.open("r") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 2:
                raise ParseError(
                    f"{cites_path}:{lineno}: expected `<id> <id>`, got {len(tokens)} tokens"
                )
            a, b = tokens
            if a in index_of and b in index_of:
                edges.append((index_of[a], index_of[b]))
            else:
                dropped += 1

    ds = Dataset(
        node_ids=node_ids,
        features=np.asarray(rows, dtype=np.float64),
        labels=labels,
        edges=edges,
        label_names=label_names,
        dropped_edges=dropped,
    )
    ds.validate()
    return ds


def _format_value(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def save_planetoid(dataset: Dataset, content_path: str | Path, cites_path: str | Path) -> None:
    """Write a Dataset back out in Planetoid format (load/save round-trips)."""
    with Path(content_path).open("w") as fh:
        for i, node_id in enumerate(dataset.node_ids):
            feats = " ".join(_format_value(v) for v in dataset.features[i])
            label = dataset.label_names[dataset.labels[i]]
            fh.write(f"{node_id} {feats} {label}\n")
    with Path(cites_path).open("w") as fh:
        for u, v in dataset.edges:
            fh.write(f"{dataset.node_ids[u]} {dataset.node_ids[v]}\n")


def row_normalize(features: np.ndarray) -> np.ndarray:
    """Scale each row to unit L1 mass; all-zero rows are left untouched."""
    sums = features.sum(axis=1, keepdims=True)
    safe = np.where(sums == 0.0, 1.0, sums)
    return features / safe


def make_splits(
    dataset: Dataset,
    per_class_train: int,
    val_size: int,
    test_size: int,
    seed: int,
) -> Splits:
    """Draw a per-class train set, then val/test from the remainder.

    Randomness comes from numpy's PCG64 generator seeded with ``seed``
    (64-bit, seedable, stable across platforms), so the index sets are
    bitwise-reproducible for a fixed seed.

    Takes ``per_class_train`` nodes from each class where available, walks
    the remaining nodes in shuffled order for ``val_size`` validation and
    ``test_size`` test nodes.
    """
    n = dataset.num_nodes
    num_classes = dataset.num_classes
    counts = np.bincount(dataset.labels, minlength=num_classes)
    if (counts == 0).any():
        empty = int(np.flatnonzero(counts == 0)[0])
        raise StratificationError(f"class {empty} has no nodes")
    if per_class_train * num_classes + val_size + test_size > n:
        raise StratificationError(
            f"requested {per_class_train}x{num_classes} train + {val_size} val + "
            f"{test_size} test exceeds {n} nodes"
        )

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)

    taken = np.zeros(num_classes, dtype=np.int64)
    train: list[int] = []
    rest: list[int] = []
    for i in perm:
        c = dataset.labels[i]
        if taken[c] < per_class_train:
            taken[c] += 1
            train.append(int(i))
        else:
            rest.append(int(i))

    if val_size + test_size > len(rest):
        raise StratificationError(
            f"{val_size} val + {test_size} test requested, only {len(rest)} nodes remain"
        )
    val = rest[:val_size]
    test = rest[val_size : val_size + test_size]

    return Splits(
        train_idx=np.sort(np.asarray(train, dtype=np.int64)),
        val_idx=np.sort(np.asarray(val, dtype=np.int64)),
        test_idx=np.sort(np.asarray(test, dtype=np.int64)),
        seed=seed,
    )
