"""Experiment configuration: JSON loading, validation with field paths,
default resolution, leaf overrides, and the config hash that names output
directories."""

from __future__ import annotations

import copy
import hashlib
import json
import os

from .attacks import AttackConfig
from .data import Dataset, SyntheticDataSpec, gen_synthetic, load_mnist
from .errors import ConfigError, ValidationError
from .nn import MlpSpec
from .ot import CostMatrix, load_cost_matrix
from .training import TrainConfig

ARTIFACT_VERSION = "0.1.0"

_DATASET_DEFAULTS_SYNTHETIC = {
    "type": "synthetic",
    "centers": [[0.0, 0.0], [1.0, 0.0], [0.5, 0.8660254037844386]],
    "sigma": 0.15,
    "per_class": 500,
    "test_per_class": 200,
}

_DATASET_DEFAULTS_MNIST = {
    "type": "mnist",
    "train_images": None,
    "train_labels": None,
    "test_images": None,
    "test_labels": None,
    "train_limit": 10000,
    "test_limit": 2000,
}

_MODEL_DEFAULTS = {"hidden": [32, 32], "activation": "relu"}

_TRAIN_DEFAULTS = {
    "mode": "ce",
    "epochs": 200,
    "learning_rate": 0.1,
    "batch_size": 128,
    "momentum": 0.9,
    "weight_decay": 5e-4,
    "lr_drop_at": 0.75,
    "attack": None,
}

_ATTACK_DEFAULTS = {
    "eps": 0.1,
    "steps": 20,
    "step_size": None,
    "norm": "linf",
    "objective": "ce",
    "random_start": True,
    "clamp": [0.0, 1.0],
    "lam": 100.0,
    "seed": 0,
}

_EVAL_DEFAULTS = {"attacks": [], "boundary": None}


def load_config(path) -> dict:
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    # resolved-config snapshots round-trip: a run can be repeated from its
    # own output directory
    if isinstance(doc, dict) and "config" in doc and "config_hash" in doc:
        return doc["config"]
    return doc


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply `--set path.to.leaf=value` overrides; values parse as JSON when possible."""
    out = copy.deepcopy(raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form path=value")
        path, _, value = item.partition("=")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = out
        keys = path.split(".")
        for k in keys[:-1]:
            if not isinstance(node.get(k), dict):
                node[k] = {}
            node = node[k]
        node[keys[-1]] = parsed
    return out


def _merge_defaults(section: dict, defaults: dict, path: str) -> dict:
    out = dict(defaults)
    for k, v in section.items():
        if k not in defaults:
            raise ConfigError(f"unknown field {path}.{k}")
        out[k] = v
    return out


def _require(cond, path, message):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def resolve(raw: dict, base_dir: str = ".") -> dict:
    """Materialize all defaults and validate; the result fully determines a run."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    known = {"seed", "dataset", "model", "train", "eval", "cost_matrix", "output_dir"}
    for k in raw:
        if k not in known:
            raise ConfigError(f"unknown top-level field {k}")

    resolved = {"seed": int(raw.get("seed", 0)), "output_dir": raw.get("output_dir", "runs")}

    ds = raw.get("dataset", {})
    ds_type = ds.get("type", "synthetic")
    if ds_type == "synthetic":
        resolved["dataset"] = _merge_defaults(ds, _DATASET_DEFAULTS_SYNTHETIC, "dataset")
        _require(resolved["dataset"]["sigma"] > 0, "dataset.sigma", "must be positive")
        _require(len(resolved["dataset"]["centers"]) >= 2, "dataset.centers", "need at least 2")
    elif ds_type == "mnist":
        resolved["dataset"] = _merge_defaults(ds, _DATASET_DEFAULTS_MNIST, "dataset")
        for key in ("train_images", "train_labels", "test_images", "test_labels"):
            p = resolved["dataset"][key]
            _require(p is not None, f"dataset.{key}", "is required for mnist datasets")
            full = os.path.join(base_dir, p) if not os.path.isabs(p) else p
            _require(os.path.exists(full), f"dataset.{key}", f"file not found: {full}")
            resolved["dataset"][key] = full
    else:
        raise ConfigError(f"dataset.type: unknown type {ds_type!r}")

    resolved["model"] = _merge_defaults(raw.get("model", {}), _MODEL_DEFAULTS, "model")
    _require(
        all(isinstance(w, int) and w > 0 for w in resolved["model"]["hidden"]),
        "model.hidden",
        "must be positive integers",
    )

    train = _merge_defaults(raw.get("train", {}), _TRAIN_DEFAULTS, "train")
    if train["attack"] is not None:
        train["attack"] = _merge_defaults(train["attack"], _ATTACK_DEFAULTS, "train.attack")
    _require(
        train["mode"] in ("ce", "pgd", "wpgd"), "train.mode", f"unknown mode {train['mode']!r}"
    )
    if train["mode"] in ("pgd", "wpgd"):
        _require(train["attack"] is not None, "train.attack", f"required for mode {train['mode']}")
    resolved["train"] = train

    cm = raw.get("cost_matrix")
    if cm is not None:
        _require(isinstance(cm, dict) and "path" in cm, "cost_matrix", "needs a path")
        p = cm["path"]
        full = os.path.join(base_dir, p) if not os.path.isabs(p) else p
        _require(os.path.exists(full), "cost_matrix.path", f"file not found: {full}")
        resolved["cost_matrix"] = {"path": full, "p": float(cm.get("p", 1.0))}
        _require(resolved["cost_matrix"]["p"] > 0, "cost_matrix.p", "must be positive")
    else:
        resolved["cost_matrix"] = None
    if train["mode"] == "wpgd":
        _require(resolved["cost_matrix"] is not None, "cost_matrix", "required for mode wpgd")

    ev = _merge_defaults(raw.get("eval", {}), _EVAL_DEFAULTS, "eval")
    attacks = []
    for i, a in enumerate(ev["attacks"]):
        a = dict(a)
        name = a.pop("name", f"attack{i}")
        merged = _merge_defaults(a, _ATTACK_DEFAULTS, f"eval.attacks[{i}]")
        merged["name"] = name
        if merged["objective"] == "wasserstein":
            _require(resolved["cost_matrix"] is not None, f"eval.attacks[{i}]", "wasserstein objective needs a cost matrix")
        attacks.append(merged)
    ev["attacks"] = attacks
    if ev["boundary"] is not None:
        b = _merge_defaults(ev["boundary"], {"bbox": [-0.5, 1.5, -0.5, 1.5], "resolution": 200}, "eval.boundary")
        _require(b["resolution"] >= 2, "eval.boundary.resolution", "must be >= 2")
        ev["boundary"] = b
    resolved["eval"] = ev
    return resolved


def config_hash(resolved: dict) -> str:
    """Hash of the resolved config, excluding the output directory."""
    doc = {k: v for k, v in resolved.items() if k != "output_dir"}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _attack_from_dict(d: dict) -> AttackConfig:
    try:
        return AttackConfig(
            eps=float(d["eps"]),
            steps=int(d["steps"]),
            step_size=None if d["step_size"] is None else float(d["step_size"]),
            norm=d["norm"],
            objective=d["objective"],
            random_start=bool(d["random_start"]),
            clamp=(float(d["clamp"][0]), float(d["clamp"][1])),
            lam=float(d["lam"]),
            seed=int(d["seed"]),
        )
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def build_dataset(resolved: dict, split: str = "train") -> Dataset:
    ds = resolved["dataset"]
    if ds["type"] == "synthetic":
        per = ds["per_class"] if split == "train" else ds["test_per_class"]
        # test split draws from an offset seed so it never overlaps training
        seed = resolved["seed"] if split == "train" else resolved["seed"] + 1
        spec = SyntheticDataSpec(
            centers=tuple(tuple(c) for c in ds["centers"]),
            sigma=float(ds["sigma"]),
            per_class=int(per),
            seed=seed,
        )
        return gen_synthetic(spec)
    images = ds["train_images"] if split == "train" else ds["test_images"]
    labels = ds["train_labels"] if split == "train" else ds["test_labels"]
    limit = ds["train_limit"] if split == "train" else ds["test_limit"]
    data = load_mnist(images, labels)
    return data.head(int(limit)) if limit else data


def build_model_spec(resolved: dict, input_dim: int, num_classes: int) -> MlpSpec:
    m = resolved["model"]
    widths = (input_dim, *m["hidden"], num_classes)
    return MlpSpec(layer_widths=widths, activation=m["activation"], seed=resolved["seed"])


def build_cost_matrix(resolved: dict) -> CostMatrix | None:
    cm = resolved["cost_matrix"]
    if cm is None:
        return None
    try:
        return load_cost_matrix(cm["path"], cm["p"])
    except ValidationError as e:
        raise ConfigError(f"cost_matrix: {e}") from e


def build_train_config(resolved: dict, cost_matrix: CostMatrix | None) -> TrainConfig:
    t = resolved["train"]
    attack = _attack_from_dict(t["attack"]) if t["attack"] is not None else None
    return TrainConfig(
        epochs=int(t["epochs"]),
        learning_rate=float(t["learning_rate"]),
        batch_size=int(t["batch_size"]),
        momentum=float(t["momentum"]),
        weight_decay=float(t["weight_decay"]),
        mode=t["mode"],
        attack=attack,
        cost_matrix=cost_matrix if t["mode"] == "wpgd" else None,
        lr_drop_at=float(t["lr_drop_at"]),
        seed=resolved["seed"],
    )


def build_eval_attacks(resolved: dict) -> list[tuple[str, AttackConfig]]:
    return [(a["name"], _attack_from_dict(a)) for a in resolved["eval"]["attacks"]]
