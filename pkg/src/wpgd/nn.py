"""Minimal dense feed-forward classifier with exact reverse-mode gradients.

Parameters and activations are float64 numpy arrays. Forward/backward are
batched internally; the single-example API wraps the batched one. Gradients
are returned for both the parameters and the input in one backward pass,
which is what the attack inner loops need.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

ACTIVATIONS = ("relu", "tanh")

CHECKPOINT_VERSION = 1

# floor applied to probabilities before taking logs; robust training drives
# confident wrong predictions and exact zeros would give -inf losses
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class MlpSpec:
    """Architecture description: layer widths (input ... K), activation, seed."""

    layer_widths: tuple[int, ...]
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValidationError("layer_widths needs at least input and output sizes")
        if any(w < 1 for w in widths):
            raise ValidationError(f"layer widths must be positive, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def num_classes(self) -> int:
        return self.layer_widths[-1]


@dataclass
class MlpParams:
    """Weights (fan_in, fan_out) and biases per layer, owned by an MlpSpec."""

    spec: MlpSpec
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)

    def __post_init__(self):
        widths = self.spec.layer_widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ValidationError("parameter count does not match spec depth")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[i], widths[i + 1]) or b.shape != (widths[i + 1],):
                raise ValidationError(
                    f"layer {i} shapes {w.shape}/{b.shape} inconsistent with spec {widths}"
                )

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.weights + self.biases])

    @classmethod
    def from_flat(cls, spec: MlpSpec, flat: np.ndarray) -> "MlpParams":
        widths = spec.layer_widths
        weights, biases = [], []
        pos = 0
        for i in range(len(widths) - 1):
            n = widths[i] * widths[i + 1]
            weights.append(np.asarray(flat[pos : pos + n], dtype=np.float64).reshape(widths[i], widths[i + 1]))
            pos += n
        for i in range(len(widths) - 1):
            n = widths[i + 1]
            biases.append(np.asarray(flat[pos : pos + n], dtype=np.float64))
            pos += n
        if pos != len(flat):
            raise ValidationError(f"flat parameter vector has {len(flat)} entries, expected {pos}")
        return cls(spec, weights, biases)


@dataclass(frozen=True)
class Prediction:
    logits: np.ndarray
    probs: np.ndarray

    @property
    def predicted_class(self) -> int:
        # np.argmax breaks ties by lowest index
        return int(np.argmax(self.probs))


def init_params(spec: MlpSpec) -> MlpParams:
    """Glorot-uniform weights, zero biases, seeded from the spec."""
    rng = np.random.default_rng(spec.seed)
    widths = spec.layer_widths
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(spec, weights, biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(name, z, a):
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def forward_batch(params: MlpParams, inputs: np.ndarray):
    """Batched forward pass.

    Returns (logits, probs, trace); inputs is (n, input_dim).
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:
        raise ValidationError(
            f"input shape {x.shape} does not match model input dim {params.spec.input_dim}"
        )
    act = params.spec.activation
    pre, post = [], [x]
    h = x
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        h = _activate(act, z) if i < n_layers - 1 else z
        post.append(h)
    logits = h
    probs = softmax(logits)
    trace = (x, pre, post)
    return logits, probs, trace


def forward(params: MlpParams, input: np.ndarray):
    """Single-example forward pass. Returns (Prediction, trace)."""
    x = np.asarray(input, dtype=np.float64).reshape(1, -1)
    logits, probs, trace = forward_batch(params, x)
    return Prediction(logits[0], probs[0]), trace


def backprop_batch(params: MlpParams, trace, upstream: np.ndarray):
    """Reverse pass from d(loss)/d(logits), shape (n, K).

    Returns (param_grads, input_grads): parameter gradients are summed over
    the batch; input gradients are per example, shape (n, input_dim).
    """
    x, pre, _post = trace
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != pre[-1].shape:
        raise ValidationError(
            f"upstream gradient shape {upstream.shape} does not match logits {pre[-1].shape}"
        )
    act = params.spec.activation
    n_layers = len(params.weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    delta = upstream
    for i in range(n_layers - 1, -1, -1):
        h_in = x if i == 0 else _activate(act, pre[i - 1])
        grad_w[i] = h_in.T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i].T
            delta = delta * _activate_grad(act, pre[i - 1], _activate(act, pre[i - 1]))
    input_grads = delta @ params.weights[0].T if n_layers > 0 else delta
    param_grads = MlpParams(params.spec, grad_w, grad_b)
    return param_grads, input_grads


def backprop(params: MlpParams, trace, upstream: np.ndarray):
    """Single-example reverse pass; upstream is d(loss)/d(logits), shape (K,)."""
    up = np.asarray(upstream, dtype=np.float64).reshape(1, -1)
    param_grads, input_grads = backprop_batch(params, trace, up)
    return param_grads, input_grads[0]


def loss_ce(pred: Prediction, label: int) -> float:
    """Cross-entropy of the predicted distribution against the true class."""
    k = int(label)
    if not 0 <= k < len(pred.probs):
        raise ValidationError(f"label {k} out of range for {len(pred.probs)} classes")
    return float(-np.log(max(pred.probs[k], PROB_FLOOR)))


def loss_ce_batch(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    n = probs.shape[0]
    p = np.maximum(probs[np.arange(n), labels], PROB_FLOOR)
    return -np.log(p)


def grad_ce_logits(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(CE)/d(logits) = probs - one_hot, batched."""
    g = probs.copy()
    g[np.arange(probs.shape[0]), labels] -= 1.0
    return g


def save_checkpoint(path, params: MlpParams) -> None:
    """JSON checkpoint; float repr round-trips bit-exactly."""
    doc = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "spec": {
            "layer_widths": list(params.spec.layer_widths),
            "activation": params.spec.activation,
            "seed": params.spec.seed,
        },
        "params": [float(v) for v in params.flat()],
    }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_checkpoint(path) -> MlpParams:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise ValidationError(f"unsupported checkpoint version {doc.get('checkpoint_version')}")
    spec = MlpSpec(
        layer_widths=tuple(doc["spec"]["layer_widths"]),
        activation=doc["spec"]["activation"],
        seed=int(doc["spec"]["seed"]),
    )
    return MlpParams.from_flat(spec, np.asarray(doc["params"], dtype=np.float64))
