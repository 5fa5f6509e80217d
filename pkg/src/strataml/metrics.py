"""Evaluation metrics: accuracy, rank-based AUROC, Spearman rank correlation."""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np
from scipy.stats import rankdata
from scipy.stats import t as t_dist

__all__ = ["accuracy", "auroc", "spearman_rho"]


def accuracy(pred: Sequence[int], truth: Sequence[int]) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty prediction vector")
    return float(np.mean(pred == truth))


def _binary_auroc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Mann-Whitney formulation: P(random positive outranks random negative),
    ties counted one half via average ranks."""
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both positives and negatives")
    ranks = rankdata(scores)
    rank_sum = float(ranks[positives].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auroc(scores, truth) -> float:
    """AUROC from scores and integer labels.

    1-D scores: binary problem, scores rank the larger label as positive.
    2-D scores (n, C): per-class probability columns; the result is the
    unweighted mean of one-vs-rest AUROCs over the classes present in truth
    (for a two-class problem this equals the plain binary AUROC).
    """
    truth = np.asarray(truth)
    scores = np.asarray(scores, dtype=np.float64)
    present = np.unique(truth)
    if present.size < 2:
        raise ValueError("AUROC undefined with a single class in truth")
    if scores.ndim == 1:
        if present.size != 2:
            raise ValueError("1-D scores only support binary problems")
        return _binary_auroc(scores, truth == present.max())
    if scores.ndim != 2 or scores.shape[0] != truth.size:
        raise ValueError("scores must be (n,) or (n, C)")
    total = 0.0
    for c in present:
        total += _binary_auroc(scores[:, int(c)], truth == c)
    return total / present.size


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """Spearman rank correlation with average ranks for ties.

    The p-value uses the two-sided t approximation
    t = rho * sqrt((n-2) / (1 - rho^2)) with n-2 degrees of freedom.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length vectors")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 observations")
    rx = rankdata(x)
    ry = rankdata(y)
    sx = rx - rx.mean()
    sy = ry - ry.mean()
    denom = math.sqrt(float(sx @ sx) * float(sy @ sy))
    if denom == 0.0:
        raise ValueError("zero variance in a ranking")
    rho = float(sx @ sy) / denom
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(t_dist.sf(abs(t), df=n - 2))
    return rho, min(1.0, p)
