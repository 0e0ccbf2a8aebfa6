"""Command-line entry point: train, sweep, cka, make-fixtures.

Configuration comes from an INI file (sections below), command-line flags
override file values. Every input is validated before any training starts
or any file is written. Exit codes: 0 success, 1 runtime failure,
2 usage/config error.

    [run]     task, dataset, plan, seeds, out
    [model]   student, teachers, hidden, layers, dropout, heads, batch_norm
    [train]   epochs, lr, weight_decay, batch_size
    [distill] lambda, boosting, adaptive_temp, fixed_tau, tau_min, tau_max

Datasets: ``sbm:small|medium|large`` (synthetic, fixed seed), a ``.json``
node-classification bundle path, or ``tu:DIR`` for a TU-format directory.
Relative paths fall back to $BGNN_DATA_DIR.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import cka_matrix, extract_layer_representations, save_cka_csv
from .errors import BgnnError, ConfigError, FormatError
from .graph_data import (
    apply_split_masks,
    generate_sbm,
    load_json_bundle,
    load_tu_dataset,
    random_split,
    save_json_bundle,
)
from .models import ModelConfig, load_checkpoint, save_checkpoint
from .pipeline import (
    TaskData,
    TrainPlan,
    evaluate,
    run_sequential,
    save_metrics,
    save_predictions,
)

ARCHS = ("gcn", "sage", "gat")
PLANS = ("nokd", "kd", "bgnn")
DATASET_SEED = 1234  # synthetic datasets and splits are fixed across runs
SPLIT_RATIOS = (0.8, 0.1, 0.1)
SBM_PRESETS = {
    "small": dict(n_per_block=40, n_blocks=2, feature_dim=8),
    "medium": dict(n_per_block=100, n_blocks=2, feature_dim=16),
    "large": dict(n_per_block=200, n_blocks=3, feature_dim=16),
}


@dataclass
class RunConfig:
    task: str = "node"
    dataset: str = "sbm:small"
    plan: str = "nokd"
    teachers: tuple = ()
    student: str = "gcn"
    hidden: int = 64
    layers: int = 2
    dropout: float = 0.5
    heads: int = 8
    batch_norm: bool = False
    epochs: int | None = None
    lr: float = 0.01
    weight_decay: float = 5e-4
    batch_size: int = 32
    lam: float = 1.0
    boosting: bool = True
    adaptive_temp: bool = True
    fixed_tau: float = 4.0
    tau_min: float = 1.0
    tau_max: float = 4.0
    seeds: tuple = (0,)
    out: str = "runs"

    def validate(self) -> None:
        if self.task not in ("node", "graph"):
            raise ConfigError(f"task must be node or graph, got {self.task!r}")
        if self.plan not in PLANS:
            raise ConfigError(f"plan must be one of {PLANS}, got {self.plan!r}")
        for arch in (self.student, *self.teachers):
            if arch not in ARCHS:
                raise ConfigError(f"architecture must be one of {ARCHS}, got {arch!r}")
        if self.plan in ("kd", "bgnn") and not self.teachers:
            raise ConfigError(f"plan {self.plan!r} needs at least one teacher")
        if not self.seeds:
            raise ConfigError("need at least one seed")


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s: str) -> tuple:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _parse_str_list(s: str) -> tuple:
    return tuple(x.strip() for x in s.split(",") if x.strip())


# (section, key) -> (RunConfig attribute, parser)
CONFIG_SCHEMA = {
    ("run", "task"): ("task", str),
    ("run", "dataset"): ("dataset", str),
    ("run", "plan"): ("plan", str),
    ("run", "seeds"): ("seeds", _parse_int_list),
    ("run", "out"): ("out", str),
    ("model", "student"): ("student", str),
    ("model", "teachers"): ("teachers", _parse_str_list),
    ("model", "hidden"): ("hidden", int),
    ("model", "layers"): ("layers", int),
    ("model", "dropout"): ("dropout", float),
    ("model", "heads"): ("heads", int),
    ("model", "batch_norm"): ("batch_norm", _parse_bool),
    ("train", "epochs"): ("epochs", int),
    ("train", "lr"): ("lr", float),
    ("train", "weight_decay"): ("weight_decay", float),
    ("train", "batch_size"): ("batch_size", int),
    ("distill", "lambda"): ("lam", float),
    ("distill", "boosting"): ("boosting", _parse_bool),
    ("distill", "adaptive_temp"): ("adaptive_temp", _parse_bool),
    ("distill", "fixed_tau"): ("fixed_tau", float),
    ("distill", "tau_min"): ("tau_min", float),
    ("distill", "tau_max"): ("tau_max", float),
}


def _anchor(path: Path, lines: list[str], pattern: str) -> str:
    pat = re.compile(pattern)
    for no, line in enumerate(lines, start=1):
        if pat.match(line):
            return f"{path}:{no}"
    return str(path)


def load_config_file(path) -> dict:
    """Parse and fully validate an INI config; unknown keys are errors."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as e:
        raise ConfigError(str(e)) from e
    sections = {s for s, _ in CONFIG_SCHEMA}
    values = {}
    for sec in cp.sections():
        if sec not in sections:
            where = _anchor(path, lines, rf"\s*\[{re.escape(sec)}\]")
            raise ConfigError(f"{where}: unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if (sec, key) not in CONFIG_SCHEMA:
                where = _anchor(path, lines, rf"\s*{re.escape(key)}\s*[=:]")
                raise ConfigError(f"{where}: unknown key {key!r} in [{sec}]")
            attr, parse = CONFIG_SCHEMA[(sec, key)]
            try:
                values[attr] = parse(raw)
            except ValueError as e:
                where = _anchor(path, lines, rf"\s*{re.escape(key)}\s*[=:]")
                raise ConfigError(f"{where}: bad value for {key!r}: {e}") from e
    return values


def load_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for attr, value in load_config_file(args.config).items():
            setattr(cfg, attr, value)
    overrides = {
        "task": args.task,
        "dataset": args.dataset,
        "plan": args.plan,
        "teachers": _parse_str_list(args.teachers) if args.teachers else None,
        "student": args.student,
        "hidden": args.hidden,
        "layers": args.layers,
        "dropout": args.dropout,
        "heads": args.heads,
        "batch_norm": args.batch_norm,
        "epochs": args.epochs,
        "lr": args.lr,
        "weight_decay": args.weight_decay,
        "batch_size": args.batch_size,
        "lam": args.lam,
        "fixed_tau": args.fixed_tau,
        "tau_min": args.tau_min,
        "tau_max": args.tau_max,
        "seeds": _parse_int_list(args.seeds) if args.seeds else None,
        "out": args.out,
    }
    for attr, value in overrides.items():
        if value is not None:
            setattr(cfg, attr, value)
    if args.no_boost:
        cfg.boosting = False
    if args.no_adaptive_temp:
        cfg.adaptive_temp = False
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# datasets


def _resolve_path(spec: str) -> Path:
    p = Path(spec)
    if p.exists():
        return p
    root = os.environ.get("BGNN_DATA_DIR")
    if root:
        candidate = Path(root) / spec
        if candidate.exists():
            return candidate
    raise ConfigError(f"dataset {spec!r} not found (also tried $BGNN_DATA_DIR)")


def load_dataset(spec: str) -> TaskData:
    """Resolve a dataset spec to task data; never mutates source files."""
    if spec.startswith("sbm:"):
        preset = spec.split(":", 1)[1]
        if preset not in SBM_PRESETS:
            raise ConfigError(f"unknown sbm preset {preset!r}; choose from {sorted(SBM_PRESETS)}")
        g = generate_sbm(p_in=0.9, p_out=0.05, seed=DATASET_SEED, **SBM_PRESETS[preset])
        split = random_split(g.n_nodes, g.node_labels, SPLIT_RATIOS, DATASET_SEED)
        return TaskData.node_level(apply_split_masks(g, split))
    if spec.startswith("tu:"):
        directory = _resolve_path(spec.split(":", 1)[1])
        graphs = load_tu_dataset(directory, directory.name)
        labels = np.array([g.graph_label for g in graphs])
        split = random_split(len(graphs), labels, SPLIT_RATIOS, DATASET_SEED)
        return TaskData.graph_level(graphs, split)
    if spec.endswith(".json"):
        return TaskData.node_level(load_json_bundle(_resolve_path(spec)))
    raise ConfigError(
        f"unrecognized dataset {spec!r}: expected sbm:<preset>, tu:<dir>, or a .json bundle"
    )


def _dataset_task(data: TaskData) -> str:
    return data.kind


# ---------------------------------------------------------------------------
# commands


def make_plan(cfg: RunConfig, data: TaskData, seed: int) -> TrainPlan:
    def arch_cfg(arch: str) -> ModelConfig:
        return ModelConfig(
            arch=arch,
            in_dim=data.feature_dim,
            hidden_dim=cfg.hidden,
            n_classes=data.n_classes,
            dropout=cfg.dropout,
            heads=cfg.heads,
            batch_norm=cfg.batch_norm,
            n_layers=cfg.layers,
            task=cfg.task,
        )

    models = [arch_cfg(a) for a in cfg.teachers] + [arch_cfg(cfg.student)]
    if cfg.plan == "nokd":
        models = [arch_cfg(cfg.student)]
    return TrainPlan(
        models=models,
        task=cfg.task,
        epochs=cfg.epochs,
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        lam=cfg.lam,
        boosting=cfg.boosting if cfg.plan == "bgnn" else False,
        adaptive_temp=cfg.adaptive_temp if cfg.plan == "bgnn" else False,
        fixed_tau=cfg.fixed_tau,
        tau_min=cfg.tau_min,
        tau_max=cfg.tau_max,
        batch_size=cfg.batch_size,
        seed=seed,
    )


def _run_plan_into(cfg: RunConfig, data: TaskData, out: Path) -> list[float]:
    """Train per seed, write artifacts, return final-step test accuracies."""
    out.mkdir(parents=True, exist_ok=True)
    accs = []
    for seed in cfg.seeds:
        plan = make_plan(cfg, data, seed)
        model, metrics = run_sequential(plan, data)
        for i, m in enumerate(metrics):
            save_metrics(m, out / f"metrics_step{i}_seed{seed}.json")
        save_predictions(evaluate(model, data, "test"), out / f"predictions_seed{seed}.csv")
        save_checkpoint(model, out / f"model_seed{seed}")
        accs.append(metrics[-1].test_acc)
    return accs


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    data = load_dataset(cfg.dataset)
    if _dataset_task(data) != cfg.task:
        raise ConfigError(
            f"dataset {cfg.dataset!r} is {_dataset_task(data)}-level but task is {cfg.task!r}"
        )
    make_plan(cfg, data, cfg.seeds[0])  # validate the full plan before writing
    _run_plan_into(cfg, data, Path(cfg.out))
    return 0


SWEEP_PARAMS = {  # attribute + value constraint
    "tau": ("fixed_tau", lambda v: v > 0),
    "lambda": ("lam", lambda v: v >= 0),
    "lr": ("lr", lambda v: v > 0),
}


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"bad sweep values {args.values!r}: {e}") from e
    if not values:
        raise ConfigError("sweep needs at least one value")
    attr, ok = SWEEP_PARAMS[args.parameter]
    if not all(ok(v) for v in values):
        raise ConfigError(f"invalid {args.parameter} values: {values}")
    data = load_dataset(cfg.dataset)
    if _dataset_task(data) != cfg.task:
        raise ConfigError(
            f"dataset {cfg.dataset!r} is {_dataset_task(data)}-level but task is {cfg.task!r}"
        )
    points = []
    for v in values:
        sub = dataclasses.replace(cfg, **{attr: v})
        if args.parameter == "tau":
            sub.adaptive_temp = False  # a fixed-temperature sweep point
        make_plan(sub, data, sub.seeds[0])
        points.append(sub)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for v, sub in zip(values, points):
        accs = _run_plan_into(sub, data, out / f"{args.parameter}={v:g}")
        rows.append((v, float(np.mean(accs)), float(np.std(accs))))
    lines = ["value,mean_acc,std"] + [f"{v:g},{m:.6f},{s:.6f}" for v, m, s in rows]
    tmp = out / "sweep.csv.tmp"
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(out / "sweep.csv")
    return 0


def cmd_cka(args: argparse.Namespace) -> int:
    prefixes = _parse_str_list(args.checkpoints)
    if not prefixes:
        raise ConfigError("need at least one checkpoint")
    for p in prefixes:
        if not (Path(p + ".json").exists() and Path(p + ".bin").exists()):
            raise ConfigError(f"checkpoint {p!r} not found (need {p}.json and {p}.bin)")
    data = load_dataset(args.dataset)
    if data.kind != "graph":
        raise ConfigError("cka needs a graph-classification dataset")
    models = [load_checkpoint(p) for p in prefixes]
    tags = []
    for i, m in enumerate(models):
        tag = m.config.arch
        if sum(1 for other in models if other.config.arch == tag) > 1:
            tag = f"{tag}{i}"
        tags.append(tag)
    sets = [
        extract_layer_representations(m, data.graphs, tag)
        for m, tag in zip(models, tags)
    ]
    save_cka_csv(cka_matrix(sets), args.out)
    return 0


# ---------------------------------------------------------------------------
# fixtures


def _write_tu_toy(out: Path, seed: int) -> None:
    """Eight tiny graphs: triangles (label 1) and 4-paths (label 2), with
    node degrees as TU node labels so the loader builds one-hot features."""
    rng = np.random.default_rng(seed)
    kinds = rng.permutation([0, 1, 0, 1, 0, 1, 0, 1])
    a_lines, indicator, node_labels, graph_labels = [], [], [], []
    offset = 0
    for gid, kind in enumerate(kinds, start=1):
        if kind == 0:
            local = [(0, 1), (1, 2), (0, 2)]
            n, degs, label = 3, [2, 2, 2], 1
        else:
            local = [(0, 1), (1, 2), (2, 3)]
            n, degs, label = 4, [1, 2, 2, 1], 2
        for u, v in local:
            a_lines.append(f"{offset + u + 1}, {offset + v + 1}")
            a_lines.append(f"{offset + v + 1}, {offset + u + 1}")
        indicator += [str(gid)] * n
        node_labels += [str(d) for d in degs]
        graph_labels.append(str(label))
        offset += n
    for name, lines in (
        ("TOY_A.txt", a_lines),
        ("TOY_graph_indicator.txt", indicator),
        ("TOY_graph_labels.txt", graph_labels),
        ("TOY_node_labels.txt", node_labels),
    ):
        tmp = out / (name + ".tmp")
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        tmp.replace(out / name)


def cmd_make_fixtures(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "sbm":
        g = generate_sbm(40, 2, 0.9, 0.05, 8, args.seed)
        split = random_split(g.n_nodes, g.node_labels, SPLIT_RATIOS, args.seed)
        save_json_bundle(apply_split_masks(g, split), out / "sbm_small.json")
    elif args.kind == "json_toy":
        g = generate_sbm(6, 2, 0.9, 0.1, 4, args.seed)
        split = random_split(g.n_nodes, g.node_labels, (0.7, 0.15, 0.15), args.seed)
        save_json_bundle(apply_split_masks(g, split), out / "toy.json")
    else:
        _write_tu_toy(out, args.seed)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("--task", choices=["node", "graph"])
    p.add_argument("--dataset", help="sbm:<preset>, tu:<dir>, or a .json bundle")
    p.add_argument("--plan", choices=list(PLANS))
    p.add_argument("--teachers", help="comma-separated teacher architectures")
    p.add_argument("--student", choices=list(ARCHS))
    p.add_argument("--hidden", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--heads", type=int)
    p.add_argument("--batch-norm", action="store_const", const=True, default=None)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--fixed-tau", type=float)
    p.add_argument("--tau-min", type=float)
    p.add_argument("--tau-max", type=float)
    p.add_argument("--no-boost", action="store_true")
    p.add_argument("--no-adaptive-temp", action="store_true")
    p.add_argument("--seeds", help="comma-separated run seeds")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bgnn", description="Sequential GNN distillation runner"
    )
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run a training plan, write artifacts")
    _add_run_flags(t)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="repeat a plan over parameter values")
    _add_run_flags(s)
    s.add_argument("--parameter", choices=sorted(SWEEP_PARAMS), required=True)
    s.add_argument("--values", default="", help="comma-separated values")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("cka", help="layer-similarity matrix from checkpoints")
    c.add_argument("--checkpoints", required=True, help="comma-separated prefixes")
    c.add_argument("--dataset", required=True)
    c.add_argument("--out", required=True, help="output CSV path")
    c.set_defaults(func=cmd_cka)

    m = sub.add_parser("make-fixtures", help="write deterministic toy datasets")
    m.add_argument("--kind", choices=["sbm", "tu_toy", "json_toy"], required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_make_fixtures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (BgnnError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
