"""Outer-loop training: plain cross-entropy, PGD adversarial training, and
WPGD robust-Wasserstein training.

For the adversarial modes each mini-batch is replaced by per-example
adversarial examples before the gradient step; the outer loss is always
cross-entropy at the attacked points. The optimizer is SGD with Nesterov
momentum and weight decay.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .attacks import AttackConfig, attack_batch
from .data import Dataset, unbalance  # noqa: F401  (unbalance re-exported here)
from .errors import ConfigError, NumericError
from .nn import MlpSpec, MlpParams, init_params, forward_batch, backprop_batch, loss_ce_batch, grad_ce_logits
from .ot import CostMatrix

MODES = ("ce", "pgd", "wpgd")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float = 0.1
    batch_size: int = 128
    momentum: float = 0.9
    weight_decay: float = 5e-4
    mode: str = "ce"
    attack: AttackConfig | None = None
    cost_matrix: CostMatrix | None = None
    lr_drop_at: float = 0.75  # fraction of epochs after which lr is multiplied by 0.1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown training mode {self.mode!r}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.mode in ("pgd", "wpgd") and self.attack is None:
            raise ConfigError(f"mode {self.mode!r} requires an attack config")
        if self.mode == "wpgd" and self.cost_matrix is None:
            raise ConfigError("mode 'wpgd' requires a cost matrix")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    natural_error: float
    adversarial_error: float | None


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        doc = {
            "epochs": [
                {
                    "epoch": e.epoch,
                    "loss": e.loss,
                    "natural_error": e.natural_error,
                    "adversarial_error": e.adversarial_error,
                }
                for e in self.epochs
            ]
        }
        if include_timing:
            doc["wall_time"] = self.wall_time
        return doc


class NesterovSGD:
    """v <- mu v - lr g;  theta <- theta + mu v - lr g."""

    def __init__(self, params: MlpParams, lr: float, momentum: float, weight_decay: float):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.vel_w = [np.zeros_like(w) for w in params.weights]
        self.vel_b = [np.zeros_like(b) for b in params.biases]

    def step(self, grads: MlpParams, batch_size: int):
        mu = self.momentum
        for w, v, gw in zip(self.params.weights, self.vel_w, grads.weights):
            g = gw / batch_size + self.weight_decay * w
            v *= mu
            v -= self.lr * g
            w += mu * v - self.lr * g
        for b, v, gb in zip(self.params.biases, self.vel_b, grads.biases):
            g = gb / batch_size  # no decay on biases
            v *= mu
            v -= self.lr * g
            b += mu * v - self.lr * g


def _natural_error(params, data: Dataset) -> float:
    _, probs, _ = forward_batch(params, data.inputs)
    pred = np.argmax(probs, axis=1)
    return 100.0 * float(np.mean(pred != data.labels))


def train(spec: MlpSpec, data: Dataset, cfg: TrainConfig):
    """Train a model; returns (params, TrainReport)."""
    if len(data) == 0:
        raise ConfigError("empty dataset")
    if spec.input_dim != data.input_dim:
        raise ConfigError(f"model input dim {spec.input_dim} != data dim {data.input_dim}")
    if spec.num_classes != data.num_classes:
        raise ConfigError(f"model has {spec.num_classes} outputs, data has {data.num_classes} classes")
    if cfg.cost_matrix is not None and cfg.cost_matrix.size != data.num_classes:
        raise ConfigError(
            f"cost matrix size {cfg.cost_matrix.size} != class count {data.num_classes}"
        )

    t0 = time.perf_counter()
    params = init_params(spec)
    opt = NesterovSGD(params, cfg.learning_rate, cfg.momentum, cfg.weight_decay)
    report = TrainReport()
    n = len(data)
    drop_epoch = int(np.ceil(cfg.lr_drop_at * cfg.epochs))

    for epoch in range(cfg.epochs):
        if cfg.epochs > 1 and epoch == drop_epoch:
            opt.lr *= 0.1
        rng = np.random.default_rng((cfg.seed, epoch))
        order = rng.permutation(n)
        epoch_loss = 0.0
        adv_wrong = 0
        adv_total = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            X = data.inputs[idx]
            y = data.labels[idx]
            if cfg.mode in ("pgd", "wpgd"):
                attack = cfg.attack
                C = cfg.cost_matrix if cfg.mode == "wpgd" else None
                if cfg.mode == "wpgd" and attack.objective != "wasserstein":
                    attack = replace(attack, objective="wasserstein")
                X, _, _ = attack_batch(params, X, y, attack, C, indices=idx)
            logits, probs, trace = forward_batch(params, X)
            losses = loss_ce_batch(probs, y)
            batch_loss = float(losses.sum())
            if not np.isfinite(batch_loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            epoch_loss += batch_loss
            if cfg.mode in ("pgd", "wpgd"):
                adv_wrong += int(np.sum(np.argmax(probs, axis=1) != y))
                adv_total += len(y)
            grads, _ = backprop_batch(params, trace, grad_ce_logits(probs, y))
            opt.step(grads, len(y))
        ae = 100.0 * adv_wrong / adv_total if adv_total else None
        report.epochs.append(
            EpochStats(
                epoch=epoch,
                loss=epoch_loss / n,
                natural_error=_natural_error(params, data),
                adversarial_error=ae,
            )
        )
    report.wall_time = time.perf_counter() - t0
    return params, report
