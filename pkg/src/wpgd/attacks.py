"""Projected-gradient-ascent attacks maximizing either the cross-entropy or
the Wasserstein loss inside an l-inf or l2 ball.

Per-example random starts are drawn from an RNG stream seeded by
(config seed, example index), so serial and batched runs produce identical
perturbations.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .nn import MlpParams, forward_batch, backprop_batch, loss_ce_batch, grad_ce_logits
from .ot import CostMatrix, grad_loss_w_logits

NORMS = ("linf", "l2")
OBJECTIVES = ("ce", "wasserstein")


@dataclass(frozen=True)
class AttackConfig:
    eps: float
    steps: int = 20
    step_size: float | None = None  # default 2.5 * eps / steps
    norm: str = "linf"
    objective: str = "ce"
    random_start: bool = True
    clamp: tuple[float, float] = (0.0, 1.0)
    lam: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")
        if self.norm not in NORMS:
            raise ValidationError(f"unknown norm {self.norm!r}")
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"unknown objective {self.objective!r}")
        if self.clamp[0] >= self.clamp[1]:
            raise ValidationError(f"clamp range {self.clamp} is empty")
        if self.step_size is not None and self.step_size <= 0:
            raise ValidationError(f"step size must be positive, got {self.step_size}")

    @property
    def alpha(self) -> float:
        return self.step_size if self.step_size is not None else 2.5 * self.eps / self.steps

    def with_seed(self, seed: int) -> "AttackConfig":
        return replace(self, seed=seed)


@dataclass
class AdversarialExample:
    x_adv: np.ndarray
    objective_value: float
    initial_objective_value: float


def project_linf(x_cand, x_center, eps, clamp=(0.0, 1.0)):
    """Clip into the l-inf ball around x_center intersected with the clamp box."""
    x_cand = np.asarray(x_cand, dtype=np.float64)
    x_center = np.asarray(x_center, dtype=np.float64)
    if x_cand.shape != x_center.shape:
        raise ValidationError(f"shape mismatch {x_cand.shape} vs {x_center.shape}")
    out = np.clip(x_cand, x_center - eps, x_center + eps)
    return np.clip(out, clamp[0], clamp[1])


def project_l2(x_cand, x_center, eps, clamp=(0.0, 1.0)):
    """Rescale the offset onto the l2 ball, then clamp component-wise.

    Clamping can only move components toward the center (the center lies in
    the clamp box), so it never leaves the ball.
    """
    x_cand = np.asarray(x_cand, dtype=np.float64)
    x_center = np.asarray(x_center, dtype=np.float64)
    if x_cand.shape != x_center.shape:
        raise ValidationError(f"shape mismatch {x_cand.shape} vs {x_center.shape}")
    offset = x_cand - x_center
    n = np.linalg.norm(offset, axis=-1, keepdims=True)
    scale = np.where(n > eps, np.divide(eps, n, out=np.ones_like(n), where=n > 0), 1.0)
    out = x_center + offset * scale
    return np.clip(out, clamp[0], clamp[1])


def _project(x_cand, x_center, cfg: AttackConfig):
    if cfg.norm == "linf":
        return project_linf(x_cand, x_center, cfg.eps, cfg.clamp)
    return project_l2(x_cand, x_center, cfg.eps, cfg.clamp)


def _random_start_offsets(cfg: AttackConfig, indices, dim):
    """One offset per example from the (seed, index) stream."""
    offsets = np.empty((len(indices), dim))
    for row, idx in enumerate(indices):
        rng = np.random.default_rng((cfg.seed, int(idx)))
        if cfg.norm == "linf":
            offsets[row] = rng.uniform(-cfg.eps, cfg.eps, size=dim)
        else:
            direction = rng.standard_normal(dim)
            nrm = np.linalg.norm(direction)
            if nrm == 0:
                offsets[row] = 0.0
            else:
                radius = cfg.eps * rng.uniform() ** (1.0 / dim)
                offsets[row] = direction / nrm * radius
    return offsets


def _objective_and_grad(params, X, labels, cfg: AttackConfig, C):
    logits, probs, trace = forward_batch(params, X)
    if cfg.objective == "ce":
        values = loss_ce_batch(probs, labels)
        up = grad_ce_logits(probs, labels)
    else:
        K = C.size
        coef = 1.0 / (cfg.lam * np.log(K))
        transport = np.sum(C.powered[labels] * probs, axis=1)
        nzp = np.maximum(probs, 1e-300)
        H = -np.sum(probs * np.log(nzp), axis=1)
        values = transport - coef * H
        up = grad_loss_w_logits(probs, labels, C, cfg.lam)
    _, input_grads = backprop_batch(params, trace, up)
    return values, input_grads


def attack_batch(params: MlpParams, X, labels, cfg: AttackConfig, C: CostMatrix | None = None, indices=None):
    """Run the attack on a batch. Returns (x_adv, initial_values, final_values).

    indices are the per-example identities used to derive random-start
    streams; they default to 0..n-1.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if cfg.objective == "wasserstein" and C is None:
        raise ValidationError("wasserstein objective requires a cost matrix")
    if indices is None:
        indices = np.arange(len(X))

    initial_values, _ = _objective_and_grad(params, X, labels, cfg, C)

    x = X.copy()
    if cfg.random_start:
        x = x + _random_start_offsets(cfg, indices, X.shape[1])
        x = _project(x, X, cfg)

    alpha = cfg.alpha
    values = initial_values
    for _ in range(cfg.steps):
        values, grads = _objective_and_grad(params, x, labels, cfg, C)
        if cfg.norm == "linf":
            step = alpha * np.sign(grads)
        else:
            n = np.linalg.norm(grads, axis=1, keepdims=True)
            step = alpha * np.divide(grads, n, out=np.zeros_like(grads), where=n > 0)
        x = _project(x + step, X, cfg)
    final_values, _ = _objective_and_grad(params, x, labels, cfg, C)
    return x, initial_values, final_values


def pgd_attack(params: MlpParams, x, label, cfg: AttackConfig, C: CostMatrix | None = None, index: int = 0) -> AdversarialExample:
    """Attack a single example; index selects its random-start stream."""
    X = np.asarray(x, dtype=np.float64).reshape(1, -1)
    x_adv, v0, v1 = attack_batch(params, X, [int(label)], cfg, C, indices=[index])
    return AdversarialExample(x_adv=x_adv[0], objective_value=float(v1[0]), initial_objective_value=float(v0[0]))
