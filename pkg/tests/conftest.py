import struct

import numpy as np
import pytest

from wpgd.nn import MlpSpec, init_params, forward_batch, loss_ce_batch
from wpgd.ot import validate_cost_matrix

# three-class toy cost matrix used throughout
TOY_COST = [[0.0, 10.0, 0.01], [10.0, 0.0, 1.0], [0.01, 1.0, 0.0]]


@pytest.fixture
def toy_cost():
    return validate_cost_matrix(TOY_COST, p=1.0)


def random_small_net(rng, max_layers=3, max_width=32, input_dim=None, num_classes=None):
    """Random MLP spec + params for gradient checks."""
    depth = rng.integers(1, max_layers + 1)
    widths = [input_dim or int(rng.integers(1, 8))]
    for _ in range(depth - 1):
        widths.append(int(rng.integers(2, max_width + 1)))
    widths.append(num_classes or int(rng.integers(2, 6)))
    activation = ["relu", "tanh"][int(rng.integers(0, 2))]
    spec = MlpSpec(tuple(widths), activation, seed=int(rng.integers(0, 2**31)))
    return spec, init_params(spec)


def fd_gradient(f, x, h=1e-5):
    """Central finite differences of scalar f over flat vector x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(len(x)):
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale))


def write_idx_images(path, images):
    """images: (n, rows, cols) uint8."""
    images = np.asarray(images, dtype=np.uint8)
    n, r, c = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, r, c))
        f.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.tobytes())
