"""Evaluation metrics: adjusted Rand index, mean sparsity, support
precision/recall against a planted mask, and Monte Carlo overlap."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .em import MixtureParams, e_step, hard_assign

__all__ = [
    "adjusted_rand_index",
    "sparsity",
    "support_precision_recall",
    "estimate_overlap",
]


def adjusted_rand_index(a, b) -> float:
    """Permutation-model adjusted Rand index from the contingency table."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("label sequences must be 1-d, nonempty and of equal length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    n = a.size

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_rows * sum_cols / total
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def sparsity(params: MixtureParams) -> float:
    """Fraction of exactly-zero coordinates among the K*d mean entries."""
    return float(np.mean(params.means == 0.0))


def match_components(estimated: MixtureParams, truth: MixtureParams) -> np.ndarray:
    """Permutation aligning estimated components to true ones by maximizing
    the total inner product of their means; perm[k] is the true component
    matched to estimated component k."""
    if estimated.K != truth.K:
        raise ValueError("component counts differ")
    gains = estimated.means @ truth.means.T
    rows, cols = linear_sum_assignment(-gains)
    perm = np.empty(estimated.K, dtype=int)
    perm[rows] = cols
    return perm


def support_precision_recall(estimated: MixtureParams, truth) -> tuple[float, float, dict]:
    """Precision and recall of the zero coordinates of the estimated means
    against the planted support, after component alignment.

    truth may be a GroundTruth or a MixtureParams. When the estimate predicts
    no zeros at all, precision is reported as 1.0 with the
    'empty_prediction' flag set, so sweeps over dense fits do not crash."""
    truth_params = truth.params if hasattr(truth, "params") else truth
    if estimated.K != truth_params.K or estimated.d != truth_params.d:
        raise ValueError("K or d mismatch between estimate and ground truth")
    perm = match_components(estimated, truth_params)
    est_zero = estimated.means == 0.0
    true_zero = (truth_params.means == 0.0)[perm]
    hits = int(np.sum(est_zero & true_zero))
    n_est = int(est_zero.sum())
    n_true = int(true_zero.sum())
    meta = {"matching": perm.tolist(), "empty_prediction": n_est == 0}
    precision = 1.0 if n_est == 0 else hits / n_est
    recall = 1.0 if n_true == 0 else hits / n_true
    return precision, recall, meta


def estimate_overlap(truth: MixtureParams, n_samples: int,
                     rng: np.random.Generator) -> float:
    """Misclassification rate of crisp assignment under the true parameters,
    estimated on n_samples fresh draws from the mixture."""
    from .dataset import sample_mixture

    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    X, labels = sample_mixture(truth, n_samples, rng)
    pred = hard_assign(e_step(X, truth))
    return float(np.mean(pred != labels))
