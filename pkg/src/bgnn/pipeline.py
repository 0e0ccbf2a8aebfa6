"""Training orchestration: supervised baselines, sequential distillation
with boosting and adaptive temperature, fixed-temperature baselines,
ensembling, and evaluation.

One shared training core backs both the supervised baseline and the
distillation step, so switching every distillation feature off reduces a
step to plain supervised training bit for bit (same seed, same rng
streams, same update order). Random streams are derived per purpose from
the run seed: parameter init uses the seed itself, dropout/sampling and
batch shuffling use spawned substreams, and the temperature module draws
from its own substream so enabling it never shifts the others.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .boosting import SampleWeights, init_weights, samme_r_update, weighted_label_loss
from .distill import adaptive_temperature, init_temperature_module, kd_loss
from .errors import ConfigError, ContractError, TrainingError
from .graph_data import DatasetSplit, Graph, batch_graphs
from .models import GnnModel, ModelConfig, build_forward_context, init_model, model_forward
from .optim import Adam
from .tensor import Tape, Tensor, backward

LAMBDA_GRID = (0.1, 0.5, 1.0, 5.0, 10.0)
LR_GRID = (0.005, 0.01, 0.05)
DEFAULT_EPOCHS = {"node": 300, "graph": 200}


@dataclass
class TaskData:
    """Node task: one graph with split masks. Graph task: a graph list
    plus a DatasetSplit over graph indices."""

    kind: str
    graph: Graph | None = None
    graphs: list[Graph] | None = None
    split: DatasetSplit | None = None

    @classmethod
    def node_level(cls, graph: Graph) -> "TaskData":
        if graph.node_labels is None:
            raise ContractError("node task needs node labels")
        if graph.train_mask is None or graph.val_mask is None or graph.test_mask is None:
            raise ContractError("node task needs train/val/test masks")
        return cls(kind="node", graph=graph)

    @classmethod
    def graph_level(cls, graphs: list[Graph], split: DatasetSplit) -> "TaskData":
        if not graphs:
            raise ContractError("graph task needs at least one graph")
        if any(g.graph_label is None for g in graphs):
            raise ContractError("graph task needs a label per graph")
        return cls(kind="graph", graphs=graphs, split=split)

    @property
    def n_samples(self) -> int:
        return self.graph.n_nodes if self.kind == "node" else len(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        if self.kind == "node":
            return self.graph.node_labels
        return np.asarray([g.graph_label for g in self.graphs], dtype=np.int64)

    @property
    def feature_dim(self) -> int:
        return (self.graph if self.kind == "node" else self.graphs[0]).feature_dim

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def split_idx(self, split: str) -> np.ndarray:
        if self.kind == "node":
            mask = {
                "train": self.graph.train_mask,
                "val": self.graph.val_mask,
                "test": self.graph.test_mask,
            }.get(split)
            if mask is None:
                raise ContractError(f"unknown split {split!r}")
            return np.flatnonzero(mask)
        idx = {
            "train": self.split.train_idx,
            "val": self.split.val_idx,
            "test": self.split.test_idx,
        }.get(split)
        if idx is None:
            raise ContractError(f"unknown split {split!r}")
        return np.asarray(idx)


@dataclass
class TrainPlan:
    """Sequence of models to train: teachers first, final student last."""

    models: list[ModelConfig]
    task: str = "node"
    epochs: int | None = None  # default 300 (node) / 200 (graph)
    lr: float = 0.01
    weight_decay: float = 5e-4
    lam: float = 1.0
    boosting: bool = True
    adaptive_temp: bool = True
    fixed_tau: float = 4.0
    tau_min: float = 1.0
    tau_max: float = 4.0
    kd_scope: str = ""  # default: all nodes / training graphs
    batch_size: int = 32
    seed: int = 0
    temp_variant: str = "auto"  # entropy first step, concat afterwards
    rescale_tau_sq: bool = False
    label: str = ""

    def __post_init__(self):
        if not self.models:
            raise ConfigError("plan needs at least one model")
        if self.task not in ("node", "graph"):
            raise ConfigError(f"unknown task {self.task!r}")
        classes = {m.n_classes for m in self.models}
        if len(classes) > 1:
            raise ConfigError(f"models disagree on class count: {sorted(classes)}")
        for m in self.models:
            if m.task != self.task:
                raise ConfigError("model task does not match plan task")
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")
        if self.fixed_tau <= 0:
            raise ConfigError("fixed tau must be positive")
        if not self.kd_scope:
            self.kd_scope = "all" if self.task == "node" else "train"
        if self.kd_scope == "all" and self.task == "graph":
            raise ConfigError(
                "graph-task distillation covers training graphs only; "
                "mini-batches carry no teacher rows for the others"
            )
        if self.kd_scope not in ("all", "train"):
            raise ConfigError(f"unknown kd scope {self.kd_scope!r}")
        if self.epochs is None:
            self.epochs = DEFAULT_EPOCHS[self.task]
        if not self.label:
            self.label = self.describe()

    def describe(self) -> str:
        archs = "->".join(m.arch for m in self.models)
        flags = []
        if len(self.models) > 1:
            flags.append(f"lam={self.lam:g}")
            flags.append("boost" if self.boosting else "noboost")
            flags.append("adapt" if self.adaptive_temp else f"tau={self.fixed_tau:g}")
        return " ".join([archs] + flags)


@dataclass
class TrainMetrics:
    plan: str
    seed: int
    per_epoch: list[dict]
    test_acc: float
    teacher_mis_acc: float | None
    wall_ms: float

    def __post_init__(self):
        if not 0.0 <= self.test_acc <= 1.0:
            raise ContractError(f"accuracy {self.test_acc} outside [0, 1]")


@dataclass
class _KdSetup:
    """Frozen per-step distillation inputs for the shared training core."""

    teacher_logits: np.ndarray
    lam: float
    adaptive: bool
    variant: str
    fixed_tau: float
    tau_min: float
    tau_max: float
    scope: str
    rescale_tau_sq: bool
    temp_seed: int


def _one_hot(labels: np.ndarray, c: int) -> np.ndarray:
    return np.eye(c)[np.asarray(labels, dtype=np.int64)]


def _rng_streams(seed: int) -> dict[str, np.random.Generator]:
    return {
        "dropout": np.random.default_rng(np.random.SeedSequence([seed, 1])),
        "shuffle": np.random.default_rng(np.random.SeedSequence([seed, 2])),
    }


def _snapshot(model: GnnModel) -> dict:
    return {
        "params": {k: v.data.copy() for k, v in model.params.items()},
        "bn": {k: v.copy() for k, v in model.bn_state.items()},
    }


def _restore(model: GnnModel, snap: dict) -> None:
    for k, v in snap["params"].items():
        model.params[k].data[...] = v
    for k, v in snap["bn"].items():
        model.bn_state[k][...] = v


def predict_logits(model: GnnModel, data: TaskData) -> np.ndarray:
    """Eval-mode logits for every sample (node or graph), full neighborhoods."""
    if data.kind == "node":
        logits, _ = model_forward(model, data.graph, training=False)
        return logits.data.copy()
    logits, _ = model_forward(model, batch_graphs(data.graphs), training=False)
    return logits.data.copy()


def predict(model: GnnModel, data: TaskData) -> np.ndarray:
    return predict_logits(model, data).argmax(axis=1)


@dataclass
class EvalResult:
    accuracy: float
    sample_ids: np.ndarray
    true: np.ndarray
    pred: np.ndarray

    @property
    def correct(self) -> np.ndarray:
        return self.true == self.pred


def evaluate(model_or_preds, data: TaskData, split: str) -> EvalResult:
    """Accuracy and per-sample correctness on one split.

    Accepts a model or an already-computed full prediction vector, so any
    reported number can be recomputed from persisted predictions.
    """
    idx = data.split_idx(split)
    if idx.size == 0:
        raise ContractError(f"split {split!r} is empty")
    preds = (
        np.asarray(model_or_preds)
        if not isinstance(model_or_preds, GnnModel)
        else predict(model_or_preds, data)
    )
    true = data.labels[idx]
    pred = preds[idx]
    return EvalResult(
        accuracy=float((true == pred).mean()), sample_ids=idx, true=true, pred=pred
    )


def top5of10(accuracies) -> float:
    """Mean of the best five out of exactly ten values."""
    vals = np.asarray(accuracies, dtype=np.float64)
    if vals.shape != (10,):
        raise ContractError(f"need exactly 10 values, got {vals.shape}")
    return float(np.sort(vals)[5:].mean())


# ---------------------------------------------------------------------------
# shared training core


def _train_student(
    config: ModelConfig,
    data: TaskData,
    plan: TrainPlan,
    seed: int,
    weights: np.ndarray | None = None,
    kd: _KdSetup | None = None,
) -> tuple[GnnModel, TrainMetrics]:
    t0 = time.perf_counter()
    streams = _rng_streams(seed)
    model = init_model(config, seed)
    train_idx = data.split_idx("train")
    labels = data.labels
    c = data.n_classes
    if config.n_classes != c:
        raise ContractError(f"model has {config.n_classes} classes, data has {c}")
    y_train = _one_hot(labels[train_idx], c)
    if weights is None:
        weights = np.full(train_idx.size, 1.0 / train_idx.size)

    params = {f"model.{k}": v for k, v in model.trainable().items()}
    temp_module = None
    active_kd = kd is not None and kd.lam > 0
    if active_kd and kd.adaptive:
        temp_module = init_temperature_module(
            kd.variant, c, kd.temp_seed, kd.tau_min, kd.tau_max
        )
        params.update({f"temp.{k}": v for k, v in temp_module.trainable().items()})
    opt = Adam(params, lr=plan.lr, weight_decay=plan.weight_decay)

    if active_kd:
        scope_global = (
            np.ones(data.n_samples, dtype=bool)
            if kd.scope == "all"
            else np.isin(np.arange(data.n_samples), train_idx)
        )
        n_scope = int(scope_global.sum())

    per_epoch: list[dict] = []
    best = {"val_acc": -1.0, "snap": _snapshot(model)}

    def epoch_eval() -> float:
        return evaluate(model, data, "val").accuracy

    if data.kind == "node":
        g = data.graph
        ctx = build_forward_context(config, g)
        for epoch in range(plan.epochs):
            with Tape() as tape:
                logits, _ = model_forward(
                    model, g, training=True, rng=streams["dropout"], ctx=ctx
                )
                probs = T.softmax_rows(T.gather_rows(logits, train_idx))
                loss = weighted_label_loss(probs, y_train, weights)
                if active_kd:
                    tau = (
                        adaptive_temperature(temp_module, kd.teacher_logits)
                        if kd.adaptive
                        else kd.fixed_tau
                    )
                    kdl = kd_loss(
                        logits,
                        kd.teacher_logits,
                        tau,
                        scope_mask=scope_global,
                        rescale_tau_sq=kd.rescale_tau_sq,
                    )
                    loss = T.add(loss, T.scale(kdl, kd.lam / n_scope))
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise TrainingError(f"training diverged at epoch {epoch}")
            backward(loss, tape)
            opt.step()
            opt.zero_grad()
            val_acc = epoch_eval()
            per_epoch.append({"epoch": epoch, "train_loss": loss_val, "val_acc": val_acc})
            if val_acc > best["val_acc"]:
                best = {"val_acc": val_acc, "snap": _snapshot(model)}
    else:
        graphs = data.graphs
        weight_by_graph = np.zeros(len(graphs))
        weight_by_graph[train_idx] = weights
        for epoch in range(plan.epochs):
            order = streams["shuffle"].permutation(train_idx)
            epoch_losses = []
            for start in range(0, order.size, plan.batch_size):
                chunk = order[start : start + plan.batch_size]
                batch = batch_graphs([graphs[i] for i in chunk])
                with Tape() as tape:
                    logits, _ = model_forward(
                        model, batch, training=True, rng=streams["dropout"]
                    )
                    probs = T.softmax_rows(logits)
                    loss = weighted_label_loss(
                        probs, _one_hot(labels[chunk], c), weight_by_graph[chunk]
                    )
                    if active_kd:
                        tau = (
                            adaptive_temperature(temp_module, kd.teacher_logits[chunk])
                            if kd.adaptive
                            else kd.fixed_tau
                        )
                        kdl = kd_loss(
                            logits,
                            kd.teacher_logits[chunk],
                            tau,
                            rescale_tau_sq=kd.rescale_tau_sq,
                        )
                        loss = T.add(loss, T.scale(kdl, kd.lam / n_scope))
                loss_val = float(loss.data)
                if not np.isfinite(loss_val):
                    raise TrainingError(f"training diverged at epoch {epoch}")
                backward(loss, tape)
                opt.step()
                opt.zero_grad()
                epoch_losses.append(loss_val)
            val_acc = epoch_eval()
            per_epoch.append(
                {
                    "epoch": epoch,
                    "train_loss": float(np.mean(epoch_losses)) if epoch_losses else 0.0,
                    "val_acc": val_acc,
                }
            )
            if val_acc > best["val_acc"]:
                best = {"val_acc": val_acc, "snap": _snapshot(model)}

    _restore(model, best["snap"])
    test_acc = evaluate(model, data, "test").accuracy
    metrics = TrainMetrics(
        plan=plan.label,
        seed=seed,
        per_epoch=per_epoch,
        test_acc=test_acc,
        teacher_mis_acc=None,
        wall_ms=(time.perf_counter() - t0) * 1000.0,
    )
    return model, metrics


# ---------------------------------------------------------------------------
# public entry points


def train_supervised(
    config: ModelConfig, data: TaskData, plan: TrainPlan, seed: int
) -> tuple[GnnModel, TrainMetrics]:
    """Plain cross-entropy training; best-validation checkpoint returned."""
    return _train_student(config, data, plan, seed)


def train_bgnn_step(
    teacher,
    student_config: ModelConfig,
    data: TaskData,
    weights: SampleWeights,
    plan: TrainPlan,
    seed: int,
    variant: str = "entropy_only",
) -> tuple[GnnModel, SampleWeights, TrainMetrics]:
    """One distillation step against a frozen teacher.

    Caches the teacher's eval-mode logits once, boosts the weights of
    training samples the teacher gets wrong, then trains a fresh student
    on weighted label loss plus the scaled distillation term. Returns the
    student, the updated weights, and metrics including the student's
    accuracy on teacher-misclassified training samples.

    ``teacher`` is a trained model, or a precomputed (n_samples,
    n_classes) logits array for synthetic/oracle teachers.
    """
    c = data.n_classes
    if isinstance(teacher, GnnModel):
        if teacher.config.n_classes != c:
            raise ContractError(
                f"teacher has {teacher.config.n_classes} classes, data has {c}"
            )
        t_logits = predict_logits(teacher, data)
    else:
        t_logits = np.asarray(teacher, dtype=np.float64)
        if t_logits.shape != (data.n_samples, c):
            raise ContractError(
                f"teacher logits {t_logits.shape} do not match "
                f"({data.n_samples}, {c})"
            )
    train_idx = data.split_idx("train")
    labels = data.labels

    if plan.boosting:
        t_train = t_logits[train_idx]
        e = np.exp(t_train - t_train.max(axis=1, keepdims=True))
        probs = e / e.sum(axis=1, keepdims=True)
        weights = samme_r_update(weights, probs, _one_hot(labels[train_idx], c))

    kd = _KdSetup(
        teacher_logits=t_logits,
        lam=plan.lam,
        adaptive=plan.adaptive_temp,
        variant=variant if plan.temp_variant == "auto" else plan.temp_variant,
        fixed_tau=plan.fixed_tau,
        tau_min=plan.tau_min,
        tau_max=plan.tau_max,
        scope=plan.kd_scope,
        rescale_tau_sq=plan.rescale_tau_sq,
        temp_seed=int(np.random.SeedSequence([seed, 3]).generate_state(1)[0]),
    )
    student, metrics = _train_student(
        student_config, data, plan, seed, weights=weights.weights, kd=kd
    )

    teacher_pred = t_logits.argmax(axis=1)
    mis = teacher_pred[train_idx] != labels[train_idx]
    if mis.any():
        student_pred = predict(student, data)
        metrics.teacher_mis_acc = float(
            (student_pred[train_idx][mis] == labels[train_idx][mis]).mean()
        )
    return student, weights, metrics


def run_sequential(plan: TrainPlan, data: TaskData) -> tuple[GnnModel, list[TrainMetrics]]:
    """Train the plan's model chain, each step distilling from the last.

    Step i uses seed plan.seed + i. The temperature module sees entropy
    alone on the first distillation step and [logits, entropy] afterwards
    unless the plan pins a variant. Weights carry across steps.
    """
    model, metrics = train_supervised(plan.models[0], data, plan, plan.seed)
    all_metrics = [metrics]
    weights = init_weights(data.split_idx("train").size, data.n_classes)
    for i, cfg in enumerate(plan.models[1:], start=1):
        variant = "entropy_only" if i == 1 else "concat"
        model, weights, metrics = train_bgnn_step(
            model, cfg, data, weights, plan, plan.seed + i, variant=variant
        )
        all_metrics.append(metrics)
    return model, all_metrics


def run_fixed_kd_baseline(
    teacher_config: ModelConfig,
    student_config: ModelConfig,
    data: TaskData,
    tau: float,
    lam: float,
    plan: TrainPlan,
    seeds,
) -> list[TrainMetrics]:
    """Constant-temperature distillation: boosting off, uniform weights."""
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    out = []
    for seed in seeds:
        step_plan = TrainPlan(
            models=[teacher_config, student_config],
            task=plan.task,
            epochs=plan.epochs,
            lr=plan.lr,
            weight_decay=plan.weight_decay,
            lam=lam,
            boosting=False,
            adaptive_temp=False,
            fixed_tau=tau,
            kd_scope=plan.kd_scope,
            batch_size=plan.batch_size,
            seed=seed,
            label=f"kd tau={tau:g} lam={lam:g}",
        )
        teacher, _ = train_supervised(teacher_config, data, step_plan, seed)
        weights = init_weights(data.split_idx("train").size, data.n_classes)
        _, _, metrics = train_bgnn_step(
            teacher, student_config, data, weights, step_plan, seed + 1
        )
        out.append(metrics)
    return out


def ensemble_predict(models: list[GnnModel], data: TaskData) -> tuple[np.ndarray, float]:
    """Argmax of mean eval-mode logits; ties resolve to the lowest class."""
    if not models:
        raise ContractError("ensemble needs at least one model")
    classes = {m.config.n_classes for m in models}
    if len(classes) > 1:
        raise ContractError(f"ensemble members disagree on class count: {sorted(classes)}")
    mean_logits = np.mean([predict_logits(m, data) for m in models], axis=0)
    preds = mean_logits.argmax(axis=1)
    acc = evaluate(preds, data, "test").accuracy
    return preds, acc


# ---------------------------------------------------------------------------
# persistence


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def save_metrics(metrics: TrainMetrics, path) -> None:
    obj = {
        "plan": metrics.plan,
        "seed": metrics.seed,
        "per_epoch": metrics.per_epoch,
        "test_acc": metrics.test_acc,
        "teacher_mis_acc": metrics.teacher_mis_acc,
        "wall_ms": metrics.wall_ms,
    }
    _atomic_write(path, json.dumps(obj))


def save_predictions(result: EvalResult, path) -> None:
    lines = ["sample_id,true,pred"]
    for sid, t, p in zip(result.sample_ids, result.true, result.pred):
        lines.append(f"{int(sid)},{int(t)},{int(p)}")
    _atomic_write(path, "\n".join(lines) + "\n")


def load_predictions(path) -> EvalResult:
    rows = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if rows[0] != "sample_id,true,pred":
        raise ContractError(f"unexpected predictions header {rows[0]!r}")
    data = np.array([[int(x) for x in row.split(",")] for row in rows[1:]], dtype=np.int64)
    if data.size == 0:
        raise ContractError("empty predictions file")
    acc = float((data[:, 1] == data[:, 2]).mean())
    return EvalResult(accuracy=acc, sample_ids=data[:, 0], true=data[:, 1], pred=data[:, 2])
