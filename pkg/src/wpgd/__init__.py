"""Cost-sensitive adversarial training via optimal transport on the label space.

The package provides a small dense network with exact reverse-mode gradients,
discrete optimal-transport solvers (exact LP, Sinkhorn, and the closed-form
one-hot case), PGD/WPGD attackers, SGD training loops, and an evaluation suite
(confusion matrices, accuracy gap, gap/metric correlation, weighted robustness
score, entropy statistics, decision-boundary rasters).
"""

__version__ = "0.1.0"

from .nn import MlpSpec, MlpParams, Prediction, init_params, forward, backprop, loss_ce
from .ot import CostMatrix, entropy, exact_ot, sinkhorn, closed_form_w, loss_w, SinkhornConfig
from .attacks import AttackConfig, AdversarialExample, pgd_attack, project_linf, project_l2
from .training import TrainConfig, TrainReport, train, unbalance
from .data import Dataset, SyntheticDataSpec, gen_synthetic, load_mnist
from .metrics import (
    ConfusionMatrix,
    confusion,
    accuracy_gap,
    gap_metric_correlation,
    robustness_score,
    entropy_stats,
    boundary_grid,
)
