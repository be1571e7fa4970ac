"""Evaluation suite: confusion matrices, accuracy gap, gap/metric correlation,
weighted robustness score, prediction-entropy statistics, and 2-D decision
boundary rasters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import AttackConfig, attack_batch
from .data import Dataset
from .errors import ValidationError
from .nn import MlpParams, forward_batch
from .ot import CostMatrix

ENTROPY_BINS = 30


@dataclass
class ConfusionMatrix:
    """Integer counts; rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValidationError(f"confusion matrix must be square, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValidationError("confusion counts must be nonnegative")

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """Row-normalized form; empty rows stay zero."""
        sums = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        return np.divide(self.counts, sums, out=np.zeros_like(self.counts, dtype=np.float64), where=sums > 0)

    def error(self) -> float:
        """Classification error in percent: 100 * (1 - trace / total)."""
        if self.total == 0:
            raise ValidationError("empty confusion matrix")
        return 100.0 * (1.0 - np.trace(self.counts) / self.total)


def confusion(
    params: MlpParams,
    data: Dataset,
    attack: AttackConfig | None = None,
    cost_matrix: CostMatrix | None = None,
    batch_size: int = 256,
) -> ConfusionMatrix:
    """Natural confusion, or adversarial confusion when an attack is given."""
    if len(data) == 0:
        raise ValidationError("empty dataset")
    K = data.num_classes
    counts = np.zeros((K, K), dtype=np.int64)
    for start in range(0, len(data), batch_size):
        idx = np.arange(start, min(start + batch_size, len(data)))
        X = data.inputs[idx]
        y = data.labels[idx]
        if attack is not None:
            X, _, _ = attack_batch(params, X, y, attack, cost_matrix, indices=idx)
        _, probs, _ = forward_batch(params, X)
        pred = np.argmax(probs, axis=1)
        np.add.at(counts, (y, pred), 1)
    return ConfusionMatrix(counts)


def accuracy_gap(c_robust: ConfusionMatrix, c_standard: ConfusionMatrix) -> np.ndarray:
    """Element-wise |robust - standard| on the row-normalized matrices."""
    if c_robust.size != c_standard.size:
        raise ValidationError(f"size mismatch {c_robust.size} vs {c_standard.size}")
    return np.abs(c_robust.normalized() - c_standard.normalized())


def _off_diagonal(m: np.ndarray) -> np.ndarray:
    K = m.shape[0]
    mask = ~np.eye(K, dtype=bool)
    return m[mask]


def gap_metric_correlation(gap: np.ndarray, C: CostMatrix) -> float:
    """Pearson correlation between off-diagonal gap entries and off-diagonal
    cost entries. Returns nan when either side has zero variance."""
    gap = np.asarray(gap, dtype=np.float64)
    if gap.shape != C.matrix.shape:
        raise ValidationError(f"gap shape {gap.shape} != cost matrix shape {C.matrix.shape}")
    a = _off_diagonal(gap)
    b = _off_diagonal(C.matrix)
    if np.std(a) == 0 or np.std(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def robustness_score(confusion_norm: np.ndarray, C: CostMatrix, baseline: float | None = None) -> float:
    """Cost-weighted sum of confusion entries, sum_ij C_ij M_ij.

    With a baseline the returned value is the offset S - baseline (zero
    reference at a chosen model).
    """
    M = np.asarray(confusion_norm, dtype=np.float64)
    if M.shape != C.matrix.shape:
        raise ValidationError(f"confusion shape {M.shape} != cost matrix shape {C.matrix.shape}")
    s = float(np.sum(C.matrix * M))
    return s if baseline is None else s - baseline


@dataclass
class EntropyStats:
    entropies: np.ndarray
    hist_counts: np.ndarray
    hist_edges: np.ndarray
    mean: float
    median: float


def entropy_stats(params: MlpParams, data: Dataset) -> EntropyStats:
    """Per-example prediction entropy, with a fixed 30-bin histogram on [0, ln K]."""
    if len(data) == 0:
        raise ValidationError("empty dataset")
    _, probs, _ = forward_batch(params, data.inputs)
    p = np.maximum(probs, 1e-300)
    H = -np.sum(probs * np.log(p), axis=1)
    edges = np.linspace(0.0, np.log(data.num_classes), ENTROPY_BINS + 1)
    counts, _ = np.histogram(H, bins=edges)
    return EntropyStats(
        entropies=H,
        hist_counts=counts,
        hist_edges=edges,
        mean=float(H.mean()),
        median=float(np.median(H)),
    )


def boundary_grid(params: MlpParams, bbox, resolution: int):
    """Predicted class over a resolution x resolution lattice of a 2-D box.

    bbox is (xmin, xmax, ymin, ymax). Returns (xs, ys, grid) where
    grid[i, j] is the class at (xs[j], ys[i]).
    """
    if params.spec.input_dim != 2:
        raise ValidationError("boundary_grid needs a 2-D input model")
    if resolution < 2:
        raise ValidationError(f"resolution must be >= 2, got {resolution}")
    xmin, xmax, ymin, ymax = bbox
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    xx, yy = np.meshgrid(xs, ys)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    _, probs, _ = forward_batch(params, pts)
    grid = np.argmax(probs, axis=1).reshape(resolution, resolution)
    return xs, ys, grid


def boundary_changes(grid: np.ndarray) -> int:
    """Boundary-length proxy: number of 4-neighbor class changes in the raster."""
    grid = np.asarray(grid)
    horiz = int(np.sum(grid[:, 1:] != grid[:, :-1]))
    vert = int(np.sum(grid[1:, :] != grid[:-1, :]))
    return horiz + vert


def write_boundary_csv(path, xs, ys, grid, meta_line: str | None = None) -> None:
    """CSV with header x,y,class; one row per lattice point."""
    with open(path, "w") as f:
        if meta_line:
            f.write(f"# {meta_line}\n")
        f.write("x,y,class\n")
        for i, y in enumerate(ys):
            for j, x in enumerate(xs):
                f.write(f"{repr(float(x))},{repr(float(y))},{int(grid[i, j])}\n")
