"""Discrete optimal transport on the label space.

Exact transport is solved as a linear program (HiGHS via scipy). The
entropy-regularized problem is solved with log-domain Sinkhorn scaling,
which stays stable even when lambda * max(C^p) is huge. When one marginal
is one-hot the optimal plan is forced by the constraints and the cost
reduces to a dot product with one row of the powered cost matrix; that is
the closed form the Wasserstein loss is built on.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .errors import ValidationError

MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class CostMatrix:
    """Symmetric zero-diagonal label metric with element-wise exponent p."""

    matrix: np.ndarray
    p: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", m)
        if self.p <= 0:
            raise ValidationError(f"exponent p must be positive, got {self.p}")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"cost matrix must be square, got shape {m.shape}")
        neg = np.argwhere(m < 0)
        if neg.size:
            i, j = neg[0]
            raise ValidationError(f"negative cost entry C[{i}][{j}] = {m[i, j]}")
        diag = np.argwhere(np.diag(m) != 0)
        if diag.size:
            i = int(diag[0][0])
            raise ValidationError(f"nonzero diagonal entry C[{i}][{i}] = {m[i, i]}")
        asym = np.argwhere(m != m.T)
        if asym.size:
            i, j = asym[0]
            raise ValidationError(f"asymmetric entries C[{i}][{j}]={m[i, j]} vs C[{j}][{i}]={m[j, i]}")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def powered(self) -> np.ndarray:
        """Element-wise p-th power C^p."""
        return self.matrix**self.p


def validate_cost_matrix(raw, p: float = 1.0) -> CostMatrix:
    return CostMatrix(np.asarray(raw, dtype=np.float64), p)


def load_cost_matrix(path, p: float = 1.0) -> CostMatrix:
    """Load a K x K cost matrix from a JSON nested list or a CSV file."""
    path = str(path)
    if path.endswith(".json"):
        with open(path) as f:
            raw = json.load(f)
        if isinstance(raw, dict):
            raw = raw["matrix"]
    else:
        with open(path, newline="") as f:
            raw = [[float(v) for v in row] for row in csv.reader(f) if row]
    return validate_cost_matrix(raw, p)


def _check_distribution(q, name="q"):
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1:
        raise ValidationError(f"{name} must be a vector")
    if np.any(q < 0):
        raise ValidationError(f"{name} has negative entries")
    if abs(q.sum() - 1.0) > MARGINAL_TOL:
        raise ValidationError(f"{name} sums to {q.sum()}, expected 1")
    return q


def entropy(q) -> float:
    """Shannon entropy -sum q ln q with 0 ln 0 = 0."""
    q = _check_distribution(q)
    nz = q > 0
    return float(-np.sum(q[nz] * np.log(q[nz])))


@dataclass
class TransportPlan:
    plan: np.ndarray
    cost: float


@dataclass(frozen=True)
class SinkhornConfig:
    lam: float = 100.0
    max_iters: int = 10000
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.lam <= 0:
            raise ValidationError(f"lambda must be positive, got {self.lam}")


@dataclass
class SinkhornResult:
    plan: np.ndarray
    cost: float  # transport term <plan, C^p>
    reg_cost: float  # <plan, C^p> - H(plan)/lambda
    iterations: int
    marginal_violation: float
    converged: bool


def exact_ot(q, q_prime, C: CostMatrix) -> TransportPlan:
    """Optimal transport between two distributions under C^p, solved as an LP."""
    q = _check_distribution(q, "q")
    qp = _check_distribution(q_prime, "q_prime")
    K = C.size
    if len(q) != K or len(qp) != K:
        raise ValidationError(f"marginal length must equal cost matrix size {K}")
    if abs(q.sum() - qp.sum()) > MARGINAL_TOL:
        raise ValidationError("marginals have different total mass")

    cost_vec = C.powered.ravel()
    # row-sum and column-sum equality constraints on the K*K plan entries
    A = np.zeros((2 * K, K * K))
    for i in range(K):
        A[i, i * K : (i + 1) * K] = 1.0
        A[K + i, i::K] = 1.0
    b = np.concatenate([q, qp])
    # one constraint is redundant; HiGHS copes, but drop it for conditioning
    res = linprog(cost_vec, A_eq=A[:-1], b_eq=b[:-1], bounds=(0, None), method="highs")
    if not res.success:
        raise ValidationError(f"transport LP failed: {res.message}")
    plan = res.x.reshape(K, K)
    return TransportPlan(plan=plan, cost=float(plan.ravel() @ cost_vec))


def sinkhorn(q, q_prime, C: CostMatrix, cfg: SinkhornConfig = SinkhornConfig()) -> SinkhornResult:
    """Entropy-regularized transport via log-domain Sinkhorn scaling.

    Zero-mass marginal entries are handled by restricting the plan to the
    support; the returned plan is zero outside it. Non-convergence within
    max_iters is flagged on the result, not raised.
    """
    q = _check_distribution(q, "q")
    qp = _check_distribution(q_prime, "q_prime")
    K = C.size
    if len(q) != K or len(qp) != K:
        raise ValidationError(f"marginal length must equal cost matrix size {K}")

    rows = np.where(q > 0)[0]
    cols = np.where(qp > 0)[0]
    M = cfg.lam * C.powered[np.ix_(rows, cols)]
    log_q = np.log(q[rows])
    log_qp = np.log(qp[cols])

    f = np.zeros(len(rows))
    g = np.zeros(len(cols))
    iterations = 0
    violation = np.inf
    for iterations in range(1, cfg.max_iters + 1):
        f = log_q - logsumexp(-M + g[None, :], axis=1)
        g = log_qp - logsumexp(-M + f[:, None], axis=0)
        log_plan = f[:, None] + g[None, :] - M
        sub = np.exp(log_plan)
        violation = float(np.abs(sub.sum(axis=1) - q[rows]).sum() + np.abs(sub.sum(axis=0) - qp[cols]).sum())
        if violation < cfg.tolerance:
            break

    plan = np.zeros((K, K))
    plan[np.ix_(rows, cols)] = sub
    transport = float(np.sum(plan * C.powered))
    nz = sub > 0
    H = float(-np.sum(sub[nz] * np.log(sub[nz])))
    return SinkhornResult(
        plan=plan,
        cost=transport,
        reg_cost=transport - H / cfg.lam,
        iterations=iterations,
        marginal_violation=violation,
        converged=violation < cfg.tolerance,
    )


def closed_form_w(q, target_class: int, C: CostMatrix) -> float:
    """Transport cost from q to a one-hot target: dot(C^p[target], q).

    The constraints force the target column of the optimal plan to equal q,
    so no optimization is needed.
    """
    q = _check_distribution(q)
    K = C.size
    if len(q) != K:
        raise ValidationError(f"distribution length {len(q)} != cost matrix size {K}")
    k = int(target_class)
    if not 0 <= k < K:
        raise ValidationError(f"target class {k} out of range for K={K}")
    return float(C.powered[k] @ q)


def loss_w(probs, label: int, C: CostMatrix, lam: float) -> float:
    """Wasserstein loss: closed-form transport term minus a normalized
    entropy bonus, (1/(lam ln K)) * H(probs)."""
    probs = np.asarray(probs, dtype=np.float64)
    K = C.size
    if K < 2:
        raise ValidationError("Wasserstein loss needs K >= 2 (ln K normalization)")
    if lam <= 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    transport = closed_form_w(probs, label, C)
    return transport - entropy(probs) / (lam * np.log(K))


def grad_loss_w_logits(probs: np.ndarray, labels: np.ndarray, C: CostMatrix, lam: float) -> np.ndarray:
    """d(loss_w)/d(logits), batched over rows of probs."""
    K = C.size
    if K < 2:
        raise ValidationError("Wasserstein loss needs K >= 2 (ln K normalization)")
    coef = 1.0 / (lam * np.log(K))
    p = np.asarray(probs, dtype=np.float64)
    # dL/dprobs = C^p[label] + coef * (ln p + 1); softmax Jacobian folds to
    # p * (g - <g, p>)
    logp = np.log(np.maximum(p, 1e-300))
    g = C.powered[np.asarray(labels, dtype=np.intp)] + coef * (logp + 1.0)
    return p * (g - np.sum(g * p, axis=-1, keepdims=True))
