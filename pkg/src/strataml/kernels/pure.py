"""Pure numpy implementations of the hot kernels.

These are the import-time fallback for the compiled extension. `scan_split`
is arranged to be bit-identical to the compiled version: class counts stay
in exact int64 arithmetic and the split score is formed by the same two
float64 divisions and one addition per candidate.
"""

from __future__ import annotations

import numpy as np

NAME = "pure"


def scan_split(sorted_values: np.ndarray, sorted_labels: np.ndarray, n_classes: int):
    """Best binary split of one pre-sorted feature column.

    Returns (t, score): the split sends the first `t` sorted rows left;
    t == -1 means no valid split (all values equal). The score is
    sum_c cL_c^2/nL + sum_c cR_c^2/nR, larger meaning purer children;
    maximizing it minimizes weighted Gini impurity.
    """
    n = sorted_values.shape[0]
    if n < 2:
        return -1, 0.0
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), sorted_labels] = 1
    left = np.cumsum(onehot, axis=0)
    totals = left[-1]
    a_left = np.einsum("ij,ij->i", left, left)
    right = totals[None, :] - left
    a_right = np.einsum("ij,ij->i", right, right)
    t = np.arange(1, n, dtype=np.int64)
    score = a_left[:-1] / t + a_right[:-1] / (n - t)
    valid = sorted_values[:-1] < sorted_values[1:]
    if not valid.any():
        return -1, 0.0
    score[~valid] = -np.inf
    best = int(np.argmax(score))
    return best + 1, float(score[best])


def knn_block(
    train_x: np.ndarray,
    train_y: np.ndarray,
    train_sq: np.ndarray,
    test_block: np.ndarray,
    k: int,
    n_classes: int,
    distance_weighted: bool,
) -> np.ndarray:
    """Class-probability votes of the k nearest training rows for one block
    of test rows (squared Euclidean metric, neighbor ties by training index)."""
    m = test_block.shape[0]
    n = train_x.shape[0]
    k = min(k, n)
    d2 = train_sq[None, :] - 2.0 * (test_block @ train_x.T)
    d2 += np.einsum("ij,ij->i", test_block, test_block)[:, None]
    np.maximum(d2, 0.0, out=d2)
    if k < n:
        neighbors = np.argpartition(d2, k - 1, axis=1)[:, :k]
    else:
        neighbors = np.broadcast_to(np.arange(n), (m, n)).copy()
    nd2 = np.take_along_axis(d2, neighbors, axis=1)
    labels = train_y[neighbors]
    if distance_weighted:
        dist = np.sqrt(nd2)
        zero = dist <= 0.0
        weights = np.empty_like(dist)
        any_zero = zero.any(axis=1)
        with np.errstate(divide="ignore"):
            weights[~any_zero] = 1.0 / dist[~any_zero]
        weights[any_zero] = zero[any_zero].astype(np.float64)
    else:
        weights = np.ones_like(nd2)
    proba = np.zeros((m, n_classes))
    for c in range(n_classes):
        proba[:, c] = np.sum(weights * (labels == c), axis=1)
    proba /= proba.sum(axis=1, keepdims=True)
    return proba
