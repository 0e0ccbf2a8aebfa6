"""Two-layer GNN encoders: GCN, GraphSage (mean aggregator), and GAT.

A model is a flat dict of named parameter tensors plus its config.
``model_forward`` returns logits and the per-layer representations
(post-activation, pre-dropout) used by the similarity analysis. Layer
count defaults to two and can be raised for depth studies; the training
pipeline always uses two.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, ShapeError
from .graph_data import Graph, GraphBatch, mean_aggregator, normalize_adjacency, sample_neighbors
from .sparse import SparseMatrix
from .tensor import Tensor

ARCHITECTURES = ("gcn", "sage", "gat")


@dataclass
class ModelConfig:
    arch: str
    in_dim: int
    hidden_dim: int
    n_classes: int
    activation: str = ""  # empty -> elu for gat, relu otherwise
    dropout: float = 0.5
    heads: int = 8
    fanout: int | str = "all"  # sage neighbor sampling during training
    batch_norm: bool = False
    n_layers: int = 2
    task: str = "node"

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch!r}")
        if min(self.in_dim, self.hidden_dim, self.n_classes) <= 0:
            raise ConfigError("layer dimensions must be positive")
        if not self.activation:
            self.activation = "elu" if self.arch == "gat" else "relu"
        if self.activation not in ("relu", "elu"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.n_layers < 2:
            raise ConfigError("at least two message-passing layers required")
        if self.task not in ("node", "graph"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.arch == "gat":
            if self.heads < 1:
                raise ConfigError("gat needs at least one head")
            if self.hidden_dim % self.heads:
                raise ConfigError(
                    f"hidden_dim {self.hidden_dim} not divisible by {self.heads} heads"
                )
        if self.fanout != "all" and int(self.fanout) < 1:
            raise ConfigError(f"fanout must be positive or 'all', got {self.fanout}")

    def layer_dims(self) -> list[int]:
        """Input dim of layer 1 through output dim of the last layer."""
        out = self.n_classes if self.task == "node" else self.hidden_dim
        return [self.in_dim] + [self.hidden_dim] * (self.n_layers - 1) + [out]


@dataclass
class GnnModel:
    config: ModelConfig
    seed: int
    params: dict[str, Tensor]
    bn_state: dict[str, np.ndarray] = field(default_factory=dict)

    def trainable(self) -> dict[str, Tensor]:
        return self.params


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_model(config: ModelConfig, seed: int) -> GnnModel:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    dims = config.layer_dims()
    params: dict[str, Tensor] = {}
    bn_state: dict[str, np.ndarray] = {}
    for l in range(1, config.n_layers + 1):
        d_in, d_out = dims[l - 1], dims[l]
        if config.arch == "gcn":
            params[f"layer{l}.W"] = Tensor(_glorot(rng, d_in, d_out, (d_in, d_out)), True)
            params[f"layer{l}.b"] = Tensor(np.zeros(d_out), True)
        elif config.arch == "sage":
            params[f"layer{l}.W"] = Tensor(
                _glorot(rng, 2 * d_in, d_out, (2 * d_in, d_out)), True
            )
            params[f"layer{l}.b"] = Tensor(np.zeros(d_out), True)
        else:  # gat
            final = l == config.n_layers
            dh = d_out if final else d_out // config.heads
            for k in range(config.heads):
                params[f"layer{l}.head{k}.W"] = Tensor(_glorot(rng, d_in, dh, (d_in, dh)), True)
                params[f"layer{l}.head{k}.a_self"] = Tensor(
                    _glorot(rng, 2 * dh, 1, (dh, 1)), True
                )
                params[f"layer{l}.head{k}.a_neigh"] = Tensor(
                    _glorot(rng, 2 * dh, 1, (dh, 1)), True
                )
            params[f"layer{l}.b"] = Tensor(np.zeros(d_out), True)
        if config.batch_norm and l < config.n_layers:
            params[f"bn{l}.gamma"] = Tensor(np.ones(d_out), True)
            params[f"bn{l}.beta"] = Tensor(np.zeros(d_out), True)
            bn_state[f"bn{l}.mean"] = np.zeros(d_out)
            bn_state[f"bn{l}.var"] = np.ones(d_out)
    if config.task == "graph":
        params["head.W"] = Tensor(
            _glorot(rng, config.hidden_dim, config.n_classes, (config.hidden_dim, config.n_classes)),
            True,
        )
        params["head.b"] = Tensor(np.zeros(config.n_classes), True)
    return GnnModel(config=config, seed=seed, params=params, bn_state=bn_state)


# ---------------------------------------------------------------------------
# layers


def gcn_layer(h: Tensor, adj_norm: SparseMatrix, W: Tensor, b: Tensor) -> Tensor:
    """Normalized-adjacency aggregation: adj_norm @ h @ W + b."""
    return T.add_bias(T.spmm(adj_norm, T.matmul(h, W)), b)


def sage_layer(h: Tensor, neighbor_mean_op: SparseMatrix, W: Tensor, b: Tensor) -> Tensor:
    """concat(h_v, mean of sampled neighbors) @ W + b.

    ``neighbor_mean_op`` is a row-stochastic operator over the sampled
    neighborhoods; its zero rows give empty samples a zero mean vector.
    """
    return T.add_bias(T.matmul(T.concat_cols(h, T.spmm(neighbor_mean_op, h)), W), b)


def gat_layer(
    h: Tensor,
    src: np.ndarray,
    dst: np.ndarray,
    head_params: list[dict[str, Tensor]],
    b: Tensor,
    n_nodes: int,
    combine: str,
) -> Tensor:
    """Multi-head attention over fixed neighborhoods (self-loops included).

    For head k: e_ij = LeakyReLU(a_selfᵀ(W h_i) + a_neighᵀ(W h_j)) for each
    edge j→i, normalized per destination with a segment softmax, then
    out_i = Σ_j α_ij W h_j. Heads are concatenated or averaged.
    """
    outs = []
    for p in head_params:
        hw = T.matmul(h, p["W"])
        s_self = T.reshape(T.matmul(hw, p["a_self"]), (n_nodes,))
        s_neigh = T.reshape(T.matmul(hw, p["a_neigh"]), (n_nodes,))
        e = T.leaky_relu(T.add(T.gather_rows(s_self, dst), T.gather_rows(s_neigh, src)), 0.2)
        alpha = T.segment_softmax(e, dst, n_nodes)
        msgs = T.scale_rows(T.gather_rows(hw, src), alpha)
        outs.append(T.segment_sum(msgs, dst, n_nodes))
    if combine == "concat":
        agg = outs[0]
        for o in outs[1:]:
            agg = T.concat_cols(agg, o)
    else:
        agg = outs[0]
        for o in outs[1:]:
            agg = T.add(agg, o)
        agg = T.scale(agg, 1.0 / len(outs))
    return T.add_bias(agg, b)


# ---------------------------------------------------------------------------
# forward


def build_forward_context(config: ModelConfig, g: Graph) -> dict:
    """Precompute the per-graph structures a forward pass needs.

    Reused across epochs; sampling-mode GraphSage draws fresh samples per
    forward from the stored neighbor lists.
    """
    if config.arch == "gcn":
        return {"adj": normalize_adjacency(g)}
    if config.arch == "sage":
        full = sample_neighbors(g, "all", np.random.default_rng(0))[0]
        return {"neighbors": full, "mean_op": mean_aggregator(full, g.n_nodes)}
    loops = np.arange(g.n_nodes)
    src = np.concatenate([g.edges[:, 0], loops]) if g.n_edges else loops
    dst = np.concatenate([g.edges[:, 1], loops]) if g.n_edges else loops
    return {"src": src, "dst": dst}


def _gat_head_params(model: GnnModel, l: int) -> list[dict[str, Tensor]]:
    return [
        {
            "W": model.params[f"layer{l}.head{k}.W"],
            "a_self": model.params[f"layer{l}.head{k}.a_self"],
            "a_neigh": model.params[f"layer{l}.head{k}.a_neigh"],
        }
        for k in range(model.config.heads)
    ]


def model_forward(
    model: GnnModel,
    data: Graph | GraphBatch,
    training: bool,
    rng: np.random.Generator | None = None,
    ctx: dict | None = None,
) -> tuple[Tensor, list[Tensor]]:
    """Run the model; returns (logits, per-layer representations).

    Node task takes a Graph and yields per-node logits; graph task takes
    a GraphBatch and yields per-graph logits via sum pooling and a linear
    head. Representations are post-activation, pre-dropout (the node
    task's final layer representation is its logits). Eval mode never
    touches the rng: GraphSage uses full neighborhoods and dropout is
    skipped.
    """
    cfg = model.config
    if cfg.task == "graph":
        if not isinstance(data, GraphBatch):
            raise ContractError("graph-task forward requires a GraphBatch")
        g = data.graph
    else:
        if isinstance(data, GraphBatch):
            raise ContractError("node-task forward requires a Graph")
        g = data
    if g.feature_dim != cfg.in_dim:
        raise ShapeError(f"feature dim {g.feature_dim} != configured in_dim {cfg.in_dim}")
    if ctx is None:
        ctx = build_forward_context(cfg, g)
    act = T.relu if cfg.activation == "relu" else T.elu
    sampling = cfg.arch == "sage" and training and cfg.fanout != "all"
    if training and (cfg.dropout > 0.0 or sampling) and rng is None:
        raise ContractError("training forward requires an rng")

    h = g.features
    reps: list[Tensor] = []
    for l in range(1, cfg.n_layers + 1):
        final = l == cfg.n_layers
        if cfg.arch == "gcn":
            h = gcn_layer(h, ctx["adj"], model.params[f"layer{l}.W"], model.params[f"layer{l}.b"])
        elif cfg.arch == "sage":
            if sampling:
                (sample,) = sample_neighbors(g, int(cfg.fanout), rng)
                op = mean_aggregator(sample, g.n_nodes)
            else:
                op = ctx["mean_op"]
            h = sage_layer(h, op, model.params[f"layer{l}.W"], model.params[f"layer{l}.b"])
        else:
            h = gat_layer(
                h,
                ctx["src"],
                ctx["dst"],
                _gat_head_params(model, l),
                model.params[f"layer{l}.b"],
                g.n_nodes,
                combine="average" if final else "concat",
            )
        if final and cfg.task == "node":
            reps.append(h)  # logits double as the last representation
            break
        h = act(h)
        reps.append(h)
        if final:
            break
        h = T.dropout(h, cfg.dropout, training, rng)
        if cfg.batch_norm:
            h = T.batch_norm(
                h,
                model.params[f"bn{l}.gamma"],
                model.params[f"bn{l}.beta"],
                model.bn_state[f"bn{l}.mean"],
                model.bn_state[f"bn{l}.var"],
                training,
            )

    if cfg.task == "graph":
        pooled = T.segment_sum(h, data.graph_ids, data.n_graphs)
        logits = T.add_bias(T.matmul(pooled, model.params["head.W"]), model.params["head.b"])
    else:
        logits = h
    return logits, reps


# ---------------------------------------------------------------------------
# checkpoints


def _checkpoint_entries(model: GnnModel) -> list[tuple[str, np.ndarray]]:
    entries = [(name, p.data) for name, p in model.params.items()]
    entries += [(f"state.{name}", arr) for name, arr in model.bn_state.items()]
    return entries


def save_checkpoint(model: GnnModel, path_prefix) -> None:
    """Write <prefix>.json (config, seed, array manifest) and <prefix>.bin.

    The binary holds every array flattened in manifest order as
    little-endian float64.
    """
    prefix = Path(path_prefix)
    entries = _checkpoint_entries(model)
    manifest = {
        "config": asdict(model.config),
        "seed": model.seed,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in entries],
    }
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in entries)
    tmp = prefix.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest), encoding="utf-8")
    tmp.replace(prefix.with_suffix(".json"))
    tmp = prefix.with_suffix(".bin.tmp")
    tmp.write_bytes(blob)
    tmp.replace(prefix.with_suffix(".bin"))


def load_checkpoint(path_prefix) -> GnnModel:
    prefix = Path(path_prefix)
    manifest = json.loads(prefix.with_suffix(".json").read_text(encoding="utf-8"))
    config = ModelConfig(**manifest["config"])
    model = init_model(config, manifest["seed"])
    blob = prefix.with_suffix(".bin").read_bytes()
    offset = 0
    entries = dict(_checkpoint_entries(model))
    for spec_entry in manifest["arrays"]:
        shape = tuple(spec_entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += count * 8
        name = spec_entry["name"]
        if name not in entries:
            raise ConfigError(f"checkpoint array {name!r} does not match the config")
        entries[name][...] = arr
    if offset != len(blob):
        raise ConfigError("checkpoint binary length does not match its manifest")
    return model
