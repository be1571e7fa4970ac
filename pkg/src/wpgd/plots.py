"""Figure rendering for the report path.

Every function writes a PNG to the given path and returns it. Figures are
rendered with the Agg backend so the CLI works headless; PNG metadata is
pinned so identical runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_META = {"Software": "wpgd"}


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_boundary(xs, ys, grid, data=None, title=None, path="boundary.png"):
    """Class raster as a filled image, with the dataset scattered on top."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(
        grid,
        origin="lower",
        extent=(xs[0], xs[-1], ys[0], ys[-1]),
        cmap="Pastel1",
        interpolation="nearest",
        aspect="auto",
        vmin=0,
        vmax=max(8, int(grid.max())),
    )
    if data is not None:
        ax.scatter(data.inputs[:, 0], data.inputs[:, 1], c=data.labels, cmap="Dark2", s=6, edgecolors="none")
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_entropy_hist(stats, num_classes, title=None, path="entropy_hist.png"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    widths = np.diff(stats.hist_edges)
    ax.bar(stats.hist_edges[:-1], stats.hist_counts, width=widths, align="edge", color="#4878d0")
    ax.axvline(stats.mean, color="k", linestyle="--", linewidth=1, label=f"mean {stats.mean:.3f}")
    ax.set_xlim(0, np.log(num_classes))
    ax.set_xlabel("prediction entropy")
    ax.set_ylabel("examples")
    ax.legend()
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_matrix(m, title=None, path="matrix.png", cmap="viridis", class_labels=None):
    """Heatmap for confusion matrices, accuracy gaps, and cost matrices."""
    m = np.asarray(m, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(m, cmap=cmap)
    fig.colorbar(im, ax=ax, fraction=0.046)
    ax.set_xlabel("predicted class")
    ax.set_ylabel("true class")
    if class_labels is not None:
        ax.set_xticks(range(len(class_labels)), class_labels)
        ax.set_yticks(range(len(class_labels)), class_labels)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_training_curves(report, title=None, path="training.png"):
    epochs = [e.epoch for e in report.epochs]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(epochs, [e.natural_error for e in report.epochs], label="natural error")
    aes = [e.adversarial_error for e in report.epochs]
    if any(a is not None for a in aes):
        ax.plot(epochs, aes, label="adversarial error")
    ax.set_xlabel("epoch")
    ax.set_ylabel("error [%]")
    ax.legend()
    if title:
        ax.set_title(title)
    return _save(fig, path)
