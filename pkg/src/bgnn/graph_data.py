"""Graph containers, dataset loaders, splits, sampling, and batching.

Two on-disk formats are supported: the TU plain-text collection format
for graph classification, and a JSON bundle for node-classification
graphs (one object holding edges, features, labels, and split indices).
Synthetic stochastic-block-model graphs cover fixtures and smoke tests.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ShapeError
from .sparse import SparseMatrix
from .tensor import Tensor

# densities below this store bundle features as index/value triplets
SPARSE_FEATURE_DENSITY = 0.25


@dataclass
class Graph:
    """A graph with node features; undirected edges appear in both directions."""

    n_nodes: int
    edges: np.ndarray  # (n_edges, 2) int64, possibly empty
    features: Tensor
    node_labels: np.ndarray | None = None
    graph_label: int | None = None
    train_mask: np.ndarray | None = None
    val_mask: np.ndarray | None = None
    test_mask: np.ndarray | None = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= self.n_nodes):
            raise FormatError(f"edge endpoint out of range [0, {self.n_nodes})")
        if self.features.shape[0] != self.n_nodes:
            raise ShapeError(
                f"feature rows {self.features.shape[0]} != n_nodes {self.n_nodes}"
            )
        masks = [m for m in (self.train_mask, self.val_mask, self.test_mask) if m is not None]
        if masks and np.any(sum(m.astype(int) for m in masks) > 1):
            raise FormatError("train/val/test masks overlap")

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def neighbors(self) -> list[np.ndarray]:
        """Per-node neighbor arrays (directed interpretation of edges)."""
        order = np.argsort(self.edges[:, 0], kind="stable") if self.n_edges else np.array([], int)
        src = self.edges[order, 0] if self.n_edges else np.array([], int)
        dst = self.edges[order, 1] if self.n_edges else np.array([], int)
        bounds = np.searchsorted(src, np.arange(self.n_nodes + 1))
        return [dst[bounds[i] : bounds[i + 1]] for i in range(self.n_nodes)]

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        if self.n_edges:
            np.add.at(d, self.edges[:, 0], 1)
        return d


@dataclass
class GraphBatch:
    """Several graphs merged into one block-diagonal graph."""

    graph: Graph
    graph_ids: np.ndarray  # per-node graph assignment, nondecreasing
    n_graphs: int
    labels: np.ndarray  # per-graph class indices

    def __post_init__(self):
        if np.any(np.diff(self.graph_ids) < 0):
            raise FormatError("graph_ids must be nondecreasing")
        if self.graph.n_edges:
            src_g = self.graph_ids[self.graph.edges[:, 0]]
            dst_g = self.graph_ids[self.graph.edges[:, 1]]
            if np.any(src_g != dst_g):
                raise FormatError("an edge crosses two graphs in the batch")


@dataclass
class DatasetSplit:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    ratios: tuple[float, float, float]
    seed: int

    def __post_init__(self):
        joined = np.concatenate([self.train_idx, self.val_idx, self.test_idx])
        if len(np.unique(joined)) != len(joined):
            raise FormatError("split index lists overlap")


# ---------------------------------------------------------------------------
# TU plain-text format


def _read_int_lines(path: Path) -> list[int]:
    return [int(line.strip()) for line in path.read_text().splitlines() if line.strip()]


def load_tu_dataset(directory, name: str) -> list[Graph]:
    """Load a TU-format graph classification dataset.

    Expects ``<NAME>_A.txt`` (1-indexed global edge pairs),
    ``<NAME>_graph_indicator.txt``, ``<NAME>_graph_labels.txt`` and,
    optionally, ``<NAME>_node_labels.txt`` (one-hot encoded as features).
    Graphs without node labels get a single constant feature; degree
    features can be attached afterwards.
    """
    directory = Path(directory)
    paths = {
        "A": directory / f"{name}_A.txt",
        "graph_indicator": directory / f"{name}_graph_indicator.txt",
        "graph_labels": directory / f"{name}_graph_labels.txt",
    }
    for key, p in paths.items():
        if not p.exists():
            raise FileNotFoundError(f"missing required file {p}")
    indicator = np.asarray(_read_int_lines(paths["graph_indicator"]), dtype=np.int64)
    n_total = indicator.shape[0]
    graph_ids = indicator - 1  # to 0-based
    n_graphs = int(graph_ids.max()) + 1 if n_total else 0

    raw_labels = np.asarray(_read_int_lines(paths["graph_labels"]), dtype=np.int64)
    if raw_labels.shape[0] != n_graphs:
        raise FormatError(
            f"{paths['graph_labels'].name}: {raw_labels.shape[0]} labels for {n_graphs} graphs"
        )
    classes = np.unique(raw_labels)
    graph_labels = np.searchsorted(classes, raw_labels)  # remap to 0..C-1

    # node id -> (graph, local id); nodes are numbered globally from 1
    local_ids = np.zeros(n_total, dtype=np.int64)
    counts = np.zeros(n_graphs, dtype=np.int64)
    for i, gid in enumerate(graph_ids):
        local_ids[i] = counts[gid]
        counts[gid] += 1

    per_graph_edges: list[list[tuple[int, int]]] = [[] for _ in range(n_graphs)]
    for line_no, line in enumerate(paths["A"].read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise FormatError(f"{paths['A'].name}:{line_no}: expected two ids, got {line!r}")
        u, v = int(parts[0]) - 1, int(parts[1]) - 1
        if not (0 <= u < n_total and 0 <= v < n_total):
            raise FormatError(f"{paths['A'].name}:{line_no}: node id out of range")
        if graph_ids[u] != graph_ids[v]:
            raise FormatError(
                f"{paths['A'].name}:{line_no}: edge joins nodes of different graphs"
            )
        per_graph_edges[graph_ids[u]].append((local_ids[u], local_ids[v]))

    node_labels_path = directory / f"{name}_node_labels.txt"
    node_features: list[np.ndarray]
    if node_labels_path.exists():
        raw_nl = np.asarray(_read_int_lines(node_labels_path), dtype=np.int64)
        if raw_nl.shape[0] != n_total:
            raise FormatError(f"{node_labels_path.name}: line count does not match node count")
        nl_classes = np.unique(raw_nl)
        nl = np.searchsorted(nl_classes, raw_nl)
        dim = nl_classes.shape[0]
        all_feats = np.zeros((n_total, dim))
        all_feats[np.arange(n_total), nl] = 1.0
    else:
        all_feats = np.ones((n_total, 1))

    graphs: list[Graph] = []
    for gid in range(n_graphs):
        node_sel = np.flatnonzero(graph_ids == gid)
        g = Graph(
            n_nodes=int(counts[gid]),
            edges=np.asarray(per_graph_edges[gid], dtype=np.int64).reshape(-1, 2),
            features=Tensor(all_feats[node_sel]),
            graph_label=int(graph_labels[gid]),
        )
        graphs.append(g)
    return graphs


# ---------------------------------------------------------------------------
# JSON node-classification bundle


def load_json_bundle(path) -> Graph:
    """Load a node-classification graph from a JSON bundle.

    The bundle stores each undirected edge once; the Graph mirrors it in
    both directions. Features may be dense (nested arrays) or sparse
    ({indices: [[row, col], ...], values, shape}).
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    for key in ("n_nodes", "edges", "features", "labels", "train_idx", "val_idx", "test_idx"):
        if key not in obj:
            raise FormatError(f"bundle {path.name} missing key {key!r}")
    n = int(obj["n_nodes"])
    stored = np.asarray(obj["edges"], dtype=np.int64).reshape(-1, 2)
    if stored.size and (stored.min() < 0 or stored.max() >= n):
        raise FormatError(f"bundle {path.name}: key 'edges' has endpoint out of range")
    edges = np.concatenate([stored, stored[:, ::-1]], axis=0) if stored.size else stored

    feats = obj["features"]
    if isinstance(feats, dict):
        for key in ("indices", "values", "shape"):
            if key not in feats:
                raise FormatError(f"bundle {path.name}: sparse features missing key {key!r}")
        shape = tuple(feats["shape"])
        x = np.zeros(shape)
        idx = np.asarray(feats["indices"], dtype=np.int64).reshape(-1, 2)
        if idx.size and (idx[:, 0].max() >= shape[0] or idx[:, 1].max() >= shape[1]):
            raise FormatError(f"bundle {path.name}: key 'features' index out of range")
        x[idx[:, 0], idx[:, 1]] = np.asarray(feats["values"], dtype=np.float64)
    else:
        x = np.asarray(feats, dtype=np.float64)

    labels = np.asarray(obj["labels"], dtype=np.int64)
    masks = {}
    for key in ("train_idx", "val_idx", "test_idx"):
        idx = np.asarray(obj[key], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise FormatError(f"bundle {path.name}: key {key!r} index out of range")
        m = np.zeros(n, dtype=bool)
        m[idx] = True
        masks[key] = m
    return Graph(
        n_nodes=n,
        edges=edges,
        features=Tensor(x),
        node_labels=labels,
        train_mask=masks["train_idx"],
        val_mask=masks["val_idx"],
        test_mask=masks["test_idx"],
    )


def save_json_bundle(g: Graph, path) -> None:
    """Write a Graph as a canonical JSON bundle.

    Canonical form: undirected edges stored once with src < dst, sorted;
    features written sparse when fewer than a quarter of entries are
    nonzero, dense otherwise. load(save(g)) reproduces the same bundle
    byte-for-byte on a second save.
    """
    lo = np.minimum(g.edges[:, 0], g.edges[:, 1])
    hi = np.maximum(g.edges[:, 0], g.edges[:, 1])
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0) if g.n_edges else np.zeros((0, 2), int)
    x = g.features.data
    density = float(np.count_nonzero(x)) / x.size if x.size else 1.0
    if density < SPARSE_FEATURE_DENSITY:
        rows, cols = np.nonzero(x)
        features = {
            "indices": np.stack([rows, cols], axis=1).tolist(),
            "values": x[rows, cols].tolist(),
            "shape": list(x.shape),
        }
    else:
        features = x.tolist()
    obj = {
        "n_nodes": g.n_nodes,
        "edges": pairs.tolist(),
        "features": features,
        "labels": (g.node_labels if g.node_labels is not None else np.zeros(0, int)).tolist(),
        "train_idx": _mask_to_idx(g.train_mask),
        "val_idx": _mask_to_idx(g.val_mask),
        "test_idx": _mask_to_idx(g.test_mask),
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(obj), encoding="utf-8")
    tmp.replace(path)


def _mask_to_idx(mask: np.ndarray | None) -> list[int]:
    return np.flatnonzero(mask).tolist() if mask is not None else []


# ---------------------------------------------------------------------------
# adjacency, features, splits, sampling, batching


def normalize_adjacency(g: Graph) -> SparseMatrix:
    """Symmetrically normalized adjacency with self-loops.

    Entry (i, j) is 1/sqrt(d_i d_j) where d is degree counted with the
    self-loop. Isolated nodes reduce to a self-loop of weight 1.
    """
    if g.n_edges:
        pairs = np.unique(g.edges, axis=0)  # drop accidental duplicates
        rows = np.concatenate([pairs[:, 0], np.arange(g.n_nodes)])
        cols = np.concatenate([pairs[:, 1], np.arange(g.n_nodes)])
    else:
        rows = cols = np.arange(g.n_nodes)
    deg = np.zeros(g.n_nodes)
    np.add.at(deg, rows, 1.0)
    inv_sqrt = 1.0 / np.sqrt(deg)
    vals = inv_sqrt[rows] * inv_sqrt[cols]
    return SparseMatrix.from_coo(g.n_nodes, g.n_nodes, rows, cols, vals)


def one_hot_degree_features(graphs: list[Graph], cap: int | None = None) -> list[Graph]:
    """Replace features with one-hot degree encodings, shared across the list.

    Dimension is min(max observed degree, cap) + 1; degrees above the cap
    land in the top bucket.
    """
    max_deg = max((int(g.degrees().max()) if g.n_nodes else 0) for g in graphs)
    top = min(max_deg, cap) if cap is not None else max_deg
    dim = top + 1
    out = []
    for g in graphs:
        idx = np.minimum(g.degrees(), top)
        x = np.zeros((g.n_nodes, dim))
        x[np.arange(g.n_nodes), idx] = 1.0
        out.append(
            Graph(
                n_nodes=g.n_nodes,
                edges=g.edges,
                features=Tensor(x),
                node_labels=g.node_labels,
                graph_label=g.graph_label,
                train_mask=g.train_mask,
                val_mask=g.val_mask,
                test_mask=g.test_mask,
            )
        )
    return out


def random_split(
    n_items: int,
    labels: np.ndarray | None,
    ratios: tuple[float, float, float],
    seed: int,
    stratified: bool = True,
) -> DatasetSplit:
    """Seeded train/val/test split, stratified per class by default.

    Within each class, floor(ratio * count) items go to val and test and
    the remainder to train. Classes smaller than the number of nonzero
    parts fall back to a pooled unstratified split with a warning.
    """
    if sum(ratios) > 1.0 + 1e-9:
        raise ConfigError(f"split ratios {ratios} sum to more than 1")
    rng = np.random.default_rng(seed)
    n_parts = sum(1 for r in ratios if r > 0)

    def split_pool(pool: np.ndarray) -> tuple[list, list, list]:
        pool = rng.permutation(pool)
        n_val = int(ratios[1] * len(pool))
        n_test = int(ratios[2] * len(pool))
        n_train = len(pool) - n_val - n_test if sum(ratios) > 1.0 - 1e-9 else int(
            ratios[0] * len(pool)
        )
        train = pool[:n_train]
        val = pool[n_train : n_train + n_val]
        test = pool[n_train + n_val : n_train + n_val + n_test]
        return list(train), list(val), list(test)

    train: list = []
    val: list = []
    test: list = []
    if stratified and labels is not None:
        labels = np.asarray(labels)
        leftovers = []
        for c in np.unique(labels):
            members = np.flatnonzero(labels == c)
            if len(members) < n_parts:
                leftovers.append(members)
                continue
            tr, va, te = split_pool(members)
            train += tr
            val += va
            test += te
        if leftovers:
            warnings.warn("classes too small to stratify; splitting them unstratified")
            tr, va, te = split_pool(np.concatenate(leftovers))
            train += tr
            val += va
            test += te
    else:
        tr, va, te = split_pool(np.arange(n_items))
        train, val, test = tr, va, te
    return DatasetSplit(
        train_idx=np.sort(np.asarray(train, dtype=np.int64)),
        val_idx=np.sort(np.asarray(val, dtype=np.int64)),
        test_idx=np.sort(np.asarray(test, dtype=np.int64)),
        ratios=tuple(ratios),
        seed=seed,
    )


def apply_split_masks(g: Graph, split: DatasetSplit) -> Graph:
    """Copy of g with boolean node masks built from split index lists."""

    def mask(idx: np.ndarray) -> np.ndarray:
        m = np.zeros(g.n_nodes, dtype=bool)
        m[np.asarray(idx, dtype=np.int64)] = True
        return m

    return replace(
        g,
        train_mask=mask(split.train_idx),
        val_mask=mask(split.val_idx),
        test_mask=mask(split.test_idx),
    )


def sample_neighbors(
    g: Graph, fanouts, rng: np.random.Generator
) -> list[list[np.ndarray]]:
    """Per-layer uniform neighbor samples without replacement.

    ``fanouts`` is one entry per layer, each a positive int or "all".
    Returns, for each layer, a list of sampled-neighbor arrays per node;
    zero-degree nodes get empty arrays.
    """
    if isinstance(fanouts, (int, str)):
        fanouts = [fanouts]
    neigh = g.neighbors()
    layers = []
    for fanout in fanouts:
        if fanout == "all":
            layers.append([n.copy() for n in neigh])
            continue
        fanout = int(fanout)
        if fanout < 1:
            raise ConfigError(f"fanout must be at least 1 or 'all', got {fanout}")
        layer = []
        for nbrs in neigh:
            if len(nbrs) <= fanout:
                layer.append(nbrs.copy())
            else:
                layer.append(rng.choice(nbrs, size=fanout, replace=False))
        layers.append(layer)
    return layers


def mean_aggregator(samples: list[np.ndarray], n_nodes: int) -> SparseMatrix:
    """Row-stochastic operator averaging each node's sampled neighbors."""
    rows, cols, vals = [], [], []
    for i, nbrs in enumerate(samples):
        if len(nbrs) == 0:
            continue
        w = 1.0 / len(nbrs)
        rows += [i] * len(nbrs)
        cols += list(nbrs)
        vals += [w] * len(nbrs)
    return SparseMatrix.from_coo(n_nodes, n_nodes, rows, cols, vals)


def batch_graphs(graphs: list[Graph]) -> GraphBatch:
    """Merge graphs into one block-diagonal graph with offset node ids."""
    if not graphs:
        raise ConfigError("cannot batch an empty list of graphs")
    dim = graphs[0].feature_dim
    for g in graphs:
        if g.feature_dim != dim:
            raise ShapeError(f"feature dims differ: {dim} vs {g.feature_dim}")
    offsets = np.cumsum([0] + [g.n_nodes for g in graphs])
    edges = [g.edges + offsets[i] for i, g in enumerate(graphs) if g.n_edges]
    merged = Graph(
        n_nodes=int(offsets[-1]),
        edges=np.concatenate(edges, axis=0) if edges else np.zeros((0, 2), dtype=np.int64),
        features=Tensor(np.concatenate([g.features.data for g in graphs], axis=0)),
    )
    graph_ids = np.repeat(np.arange(len(graphs)), [g.n_nodes for g in graphs])
    labels = np.asarray(
        [g.graph_label if g.graph_label is not None else -1 for g in graphs], dtype=np.int64
    )
    return GraphBatch(graph=merged, graph_ids=graph_ids, n_graphs=len(graphs), labels=labels)


def unbatch(batch: GraphBatch) -> list[Graph]:
    """Inverse of batch_graphs (labels restored, masks not carried)."""
    out = []
    for gid in range(batch.n_graphs):
        node_sel = np.flatnonzero(batch.graph_ids == gid)
        offset = node_sel[0] if node_sel.size else 0
        if batch.graph.n_edges:
            e = batch.graph.edges
            keep = batch.graph_ids[e[:, 0]] == gid
            edges = e[keep] - offset
        else:
            edges = np.zeros((0, 2), dtype=np.int64)
        out.append(
            Graph(
                n_nodes=node_sel.size,
                edges=edges,
                features=Tensor(batch.graph.features.data[node_sel]),
                graph_label=int(batch.labels[gid]) if batch.labels[gid] >= 0 else None,
            )
        )
    return out


def generate_sbm(
    n_per_block: int,
    n_blocks: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    seed: int,
    noise_scale: float = 1.0,
) -> Graph:
    """Stochastic block model with block index as node label.

    Features are a one-hot block indicator (in the first n_blocks
    columns) plus seeded gaussian noise at ``noise_scale`` everywhere.
    """
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ConfigError("edge probabilities must lie in [0, 1]")
    if feature_dim < n_blocks:
        raise ConfigError(f"feature_dim {feature_dim} < n_blocks {n_blocks}")
    rng = np.random.default_rng(seed)
    n = n_per_block * n_blocks
    labels = np.repeat(np.arange(n_blocks), n_per_block)
    iu, ju = np.triu_indices(n, k=1)
    p = np.where(labels[iu] == labels[ju], p_in, p_out)
    chosen = rng.random(p.shape) < p
    src, dst = iu[chosen], ju[chosen]
    edges = np.concatenate(
        [np.stack([src, dst], axis=1), np.stack([dst, src], axis=1)], axis=0
    )
    x = rng.standard_normal((n, feature_dim)) * noise_scale
    x[np.arange(n), labels] += 1.0
    return Graph(n_nodes=n, edges=edges, features=Tensor(x), node_labels=labels)
