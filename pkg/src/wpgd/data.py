"""Dataset construction: synthetic 2-D Gaussian mixtures and MNIST-format IDX files."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import IdxFormatError, ValidationError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Immutable bundle of inputs (n, d), integer labels (n,), and class count."""

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    provenance: str = "synthetic"

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or len(self.inputs) != len(self.labels):
            raise ValidationError("inputs must be (n, d) with one label per row")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValidationError(f"labels outside [0, {self.num_classes})")
        self.inputs.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.inputs[idx].copy(), self.labels[idx].copy(), self.num_classes, self.provenance)

    def head(self, n: int) -> "Dataset":
        return self.subset(np.arange(min(n, len(self))))

    def one_hot(self) -> np.ndarray:
        out = np.zeros((len(self), self.num_classes))
        out[np.arange(len(self)), self.labels] = 1.0
        return out

    def to_csv(self, path) -> None:
        """Rows x1,...,xd,label."""
        d = self.input_dim
        header = ",".join(f"x{i + 1}" for i in range(d)) + ",label"
        with open(path, "w") as f:
            f.write(header + "\n")
            for x, y in zip(self.inputs, self.labels):
                f.write(",".join(repr(float(v)) for v in x) + f",{int(y)}\n")


@dataclass(frozen=True)
class SyntheticDataSpec:
    """Gaussian blob mixture: one isotropic blob per class."""

    centers: tuple[tuple[float, float], ...]
    sigma: float = 0.15
    per_class: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if len(self.centers) < 2:
            raise ValidationError("need at least 2 class centers")
        object.__setattr__(self, "centers", tuple(tuple(float(c) for c in ctr) for ctr in self.centers))


def default_three_class_spec(per_class: int = 500, sigma: float = 0.15, seed: int = 0) -> SyntheticDataSpec:
    """Equilateral-triangle centers: separable but adjacent classes."""
    centers = ((0.0, 0.0), (1.0, 0.0), (0.5, np.sqrt(3.0) / 2.0))
    return SyntheticDataSpec(centers=centers, sigma=sigma, per_class=per_class, seed=seed)


def gen_synthetic(spec: SyntheticDataSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    xs, ys = [], []
    for k, center in enumerate(spec.centers):
        pts = np.asarray(center) + spec.sigma * rng.standard_normal((spec.per_class, len(center)))
        xs.append(pts)
        ys.append(np.full(spec.per_class, k, dtype=np.int64))
    return Dataset(np.concatenate(xs), np.concatenate(ys), len(spec.centers), "synthetic")


def _open_maybe_gzip(path):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_be32(f, offset, what):
    data = f.read(4)
    if len(data) != 4:
        raise IdxFormatError(f"truncated file while reading {what}", offset)
    return struct.unpack(">I", data)[0], offset + 4


def _read_idx(path, expected_magic, rank):
    with _open_maybe_gzip(path) as f:
        offset = 0
        magic, offset = _read_be32(f, offset, "magic")
        if magic != expected_magic:
            raise IdxFormatError(f"bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}", 0)
        dims = []
        for i in range(rank):
            d, offset = _read_be32(f, offset, f"dimension {i}")
            dims.append(d)
        count = int(np.prod(dims))
        raw = f.read(count)
        if len(raw) != count:
            raise IdxFormatError(f"truncated data: expected {count} bytes, got {len(raw)}", offset + len(raw))
        extra = f.read(1)
        if extra:
            raise IdxFormatError("trailing bytes after expected payload", offset + count)
        return np.frombuffer(raw, dtype=np.uint8).reshape(dims)


def load_mnist(images_path, labels_path) -> Dataset:
    """Parse an IDX image/label pair; pixels are scaled from bytes to [0, 1]."""
    images = _read_idx(images_path, IDX_IMAGE_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABEL_MAGIC, 1)
    if len(images) != len(labels):
        raise IdxFormatError(f"image count {len(images)} != label count {len(labels)}")
    bad = np.argwhere(labels >= 10)
    if bad.size:
        i = int(bad[0][0])
        raise IdxFormatError(f"label {int(labels[i])} at index {i} outside [0, 10)")
    n = len(images)
    flat = images.reshape(n, -1).astype(np.float64) / 255.0
    return Dataset(flat, labels.astype(np.int64), 10, "mnist")


def unbalance(data: Dataset, keep_class: int, ratio: float, seed: int = 0) -> Dataset:
    """Subsample one class so its count over the largest other class equals ratio.

    The result is a subset of the original examples (no synthesis); order of
    the surviving examples is preserved.
    """
    if not 0 < ratio <= 1:
        raise ValidationError(f"ratio must be in (0, 1], got {ratio}")
    if not 0 <= keep_class < data.num_classes:
        raise ValidationError(f"class {keep_class} out of range")
    counts = np.bincount(data.labels, minlength=data.num_classes)
    majority = int(max(counts[k] for k in range(data.num_classes) if k != keep_class))
    target = int(ratio * majority)
    if target < 1:
        raise ValidationError(f"subsampling class {keep_class} to ratio {ratio} leaves it empty")
    cls_idx = np.where(data.labels == keep_class)[0]
    if target >= len(cls_idx):
        return data
    rng = np.random.default_rng(seed)
    kept = rng.choice(cls_idx, size=target, replace=False)
    mask = np.ones(len(data), dtype=bool)
    mask[cls_idx] = False
    mask[kept] = True
    return data.subset(np.where(mask)[0])
